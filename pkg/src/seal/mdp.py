"""Episodic environment abstraction shared by the main task and the watermark MDP."""
from __future__ import annotations

import abc
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import DomainError, UsageError

Policy = Callable[[np.ndarray], int]


@dataclass(frozen=True)
class EnvMeta:
    """Static facts about an environment used for compatibility checks.

    ``obs_low``/``obs_high`` bound every observation the environment can emit
    as a non-terminal state. Unbounded coordinates use +/-inf.
    """

    state_dim: int
    n_actions: int
    max_steps: int
    obs_low: tuple = ()
    obs_high: tuple = ()

    def contains(self, state) -> bool:
        """True when ``state`` lies inside the observation box."""
        s = np.asarray(state, dtype=float)
        if not self.obs_low:
            return True
        return bool(np.all(s >= np.asarray(self.obs_low)) and np.all(s <= np.asarray(self.obs_high)))


@dataclass(frozen=True)
class StepOutcome:
    next_state: np.ndarray
    reward: float
    done: bool
    # done because the step cap was hit rather than a failure/terminal state
    truncated: bool = False


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool
    truncated: bool = False


@dataclass
class EpisodeTrace:
    transitions: list = field(default_factory=list)

    @property
    def total_reward(self) -> float:
        return float(sum(t.reward for t in self.transitions))

    @property
    def length(self) -> int:
        return len(self.transitions)

    @property
    def rewards(self) -> list:
        return [t.reward for t in self.transitions]


class Environment(abc.ABC):
    """Base class for episodic, discrete-action environments.

    Subclasses implement ``_reset`` and ``_transition``; the base class owns
    the step counter, the action check, and the step cap, so every
    environment reports ``done`` at ``max_steps`` the same way.
    """

    def __init__(self, seed: Optional[int] = None):
        self.rng = np.random.default_rng(seed)
        self._steps = 0
        self._done = True
        self._needs_reset = True
        self._state = None

    @property
    @abc.abstractmethod
    def meta(self) -> EnvMeta:
        ...

    @property
    def state_dim(self) -> int:
        return self.meta.state_dim

    @property
    def n_actions(self) -> int:
        return self.meta.n_actions

    @property
    def max_steps(self) -> int:
        return self.meta.max_steps

    @property
    def steps(self) -> int:
        return self._steps

    @property
    def state(self) -> np.ndarray:
        return np.array(self._state, dtype=float)

    def seed(self, seed: Optional[int]) -> None:
        self.rng = np.random.default_rng(seed)

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        if seed is not None:
            self.seed(seed)
        self._steps = 0
        self._done = False
        self._needs_reset = False
        self._state = self._reset()
        return self.state

    def step(self, action) -> StepOutcome:
        if self._needs_reset:
            raise UsageError("step() called before reset()")
        if self._done:
            raise UsageError("step() called on a finished episode; call reset() first")
        a = _check_action(action, self.n_actions)
        next_state, reward, terminated = self._transition(a)
        self._steps += 1
        self._state = next_state
        capped = self._steps >= self.max_steps
        done = bool(terminated or capped)
        self._done = done
        return StepOutcome(self.state, float(reward), done, truncated=bool(capped and not terminated))

    @abc.abstractmethod
    def _reset(self):
        """Return the initial internal state."""

    @abc.abstractmethod
    def _transition(self, action: int):
        """Return ``(next_state, reward, terminated)`` and nothing else."""


def _check_action(action, n_actions: int) -> int:
    try:
        a = int(action)
    except (TypeError, ValueError):
        raise DomainError(f"action must be an integer, got {action!r}") from None
    if a != action or not 0 <= a < n_actions:
        raise DomainError(f"action {action!r} outside action space {{0..{n_actions - 1}}}")
    return a


def run_episode(env: Environment, policy: Policy, max_steps: Optional[int] = None,
                seed: Optional[int] = None) -> EpisodeTrace:
    """Roll out ``policy`` for one episode of at most ``max_steps`` steps."""
    if max_steps is None:
        max_steps = env.max_steps
    trace = EpisodeTrace()
    if max_steps <= 0:
        return trace
    state = env.reset(seed=seed)
    for _ in range(max_steps):
        action = policy(state)
        out = env.step(action)
        trace.transitions.append(
            Transition(state, int(action), out.reward, out.next_state, out.done, out.truncated))
        state = out.next_state
        if out.done:
            break
    return trace
