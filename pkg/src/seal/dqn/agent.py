"""Epsilon-greedy DQN agent: exploration schedule, action selection, TD updates."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..exceptions import ConfigurationError, TrainingFault
from .network import Adam, QNetwork, q_values
from .replay import PrioritizedReplayBuffer


@dataclass
class Hyperparams:
    total_timesteps: int = 100_000
    gamma: float = 0.99
    learning_rate: float = 1e-3
    adam_eps: float = 1e-8
    buffer_size: int = 50_000
    learning_starts: int = 1000
    target_update_freq: int = 500
    exploration_fraction: float = 0.1
    exploration_initial_eps: float = 1.0
    exploration_final_eps: float = 0.02
    batch_size: int = 32
    hidden_sizes: tuple = (128, 128)
    prioritized_replay: bool = True
    alpha: float = 0.6
    beta: float = 0.4
    # anneal beta linearly to 1.0 over the run when set
    beta_final: Optional[float] = None
    priority_eps: float = 1e-6
    huber_delta: float = 1.0
    grad_norm_clip: Optional[float] = 10.0
    # treat step-cap endings as non-terminal in the TD target
    bootstrap_on_truncation: bool = True

    def __post_init__(self):
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        if not 0 < self.gamma <= 1:
            raise ConfigurationError(f"gamma must lie in (0, 1], got {self.gamma}")
        for name in ("buffer_size", "target_update_freq", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive")
        if self.total_timesteps < 0 or self.learning_starts < 0:
            raise ConfigurationError("total_timesteps and learning_starts must be non-negative")
        if not 0 <= self.exploration_final_eps <= self.exploration_initial_eps <= 1:
            raise ConfigurationError("need 0 <= final eps <= initial eps <= 1")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d


@dataclass(frozen=True)
class ExplorationSchedule:
    """Linear decay from ``initial`` to ``final`` over ``horizon`` steps, then flat."""

    horizon: int
    initial: float = 1.0
    final: float = 0.02

    @classmethod
    def from_hyperparams(cls, hp: Hyperparams) -> "ExplorationSchedule":
        horizon = int(hp.exploration_fraction * hp.total_timesteps)
        return cls(horizon, hp.exploration_initial_eps, hp.exploration_final_eps)

    def __call__(self, t: int) -> float:
        if self.horizon <= 0 or t >= self.horizon:
            return self.final
        frac = t / self.horizon
        return self.initial + frac * (self.final - self.initial)


def select_action(net: QNetwork, state, eps: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy choice; greedy ties go to the lowest action index."""
    if eps > 0 and rng.random() < eps:
        return int(rng.integers(net.n_actions))
    return int(np.argmax(q_values(net, state)))


def td_loss_and_grads(net: QNetwork, target_net: QNetwork, batch: dict, weights,
                      gamma: float, huber_delta: float = 1.0):
    """Importance-weighted Huber TD loss, its parameter gradients, and TD errors.

    Targets are ``r + gamma * (1 - done) * max_a Q_target(s', a)`` and are
    treated as constants.
    """
    states = batch["states"]
    actions = np.asarray(batch["actions"], dtype=np.int64)
    n = len(actions)
    rows = np.arange(n)
    q, acts = net.forward_cached(states)
    q_next = target_net.forward(batch["next_states"]).max(axis=1)
    y = batch["rewards"] + gamma * (1.0 - batch["dones"]) * q_next
    td = q[rows, actions] - y
    abs_td = np.abs(td)
    quad = np.minimum(abs_td, huber_delta)
    huber = 0.5 * quad ** 2 + huber_delta * (abs_td - quad)
    w = np.asarray(weights, dtype=float)
    loss = float(np.mean(w * huber))
    grad_q = np.zeros_like(q)
    grad_q[rows, actions] = w * np.clip(td, -huber_delta, huber_delta) / n
    grads = net.backward(acts, grad_q)
    return loss, grads, td


def clip_grad_norm(grad: np.ndarray, max_norm: Optional[float]) -> np.ndarray:
    if max_norm is None:
        return grad
    norm = float(np.sqrt(grad @ grad))
    if norm > max_norm:
        grad = grad * (max_norm / norm)
    return grad


def td_train_step(net: QNetwork, target_net: QNetwork, buffer: PrioritizedReplayBuffer,
                  hp: Hyperparams, rng: np.random.Generator, optimizer: Adam) -> float:
    """Sample a batch, take one Adam step on the TD loss, refresh priorities."""
    batch, weights, idx = buffer.sample(hp.batch_size, rng)
    if not hp.prioritized_replay:
        weights = np.ones_like(weights)
    loss, grads, td = td_loss_and_grads(net, target_net, batch, weights, hp.gamma, hp.huber_delta)
    grad = net.flatten_grads(grads)
    if not (np.isfinite(loss) and np.isfinite(grad).all()):
        raise TrainingFault(
            "non-finite TD loss or gradient",
            diagnostics={"loss": loss, "max_abs_td": float(np.nanmax(np.abs(td))),
                         "indices": idx.tolist(), "adam_step": optimizer.t})
    optimizer.step(net.flat, clip_grad_norm(grad, hp.grad_norm_clip))
    if hp.prioritized_replay:
        buffer.update_priorities(idx, np.abs(td) + hp.priority_eps)
    return loss


def sync_target(net: QNetwork, target_net: QNetwork) -> None:
    target_net.flat[...] = net.flat


class DQNAgent:
    """Online network, target copy, optimizer, replay and exploration as one unit."""

    def __init__(self, state_dim: int, n_actions: int, hp: Optional[Hyperparams] = None,
                 seed: Optional[int] = None):
        self.hp = hp if hp is not None else Hyperparams()
        init_seq, act_seq = np.random.SeedSequence(seed).spawn(2)
        self.rng = np.random.default_rng(act_seq)
        self.net = QNetwork(state_dim, n_actions, self.hp.hidden_sizes, rng=np.random.default_rng(init_seq))
        self.target_net = self.net.copy()
        self.optimizer = Adam(self.net.flat.size, lr=self.hp.learning_rate, eps=self.hp.adam_eps)
        alpha = self.hp.alpha if self.hp.prioritized_replay else 0.0
        self.buffer = PrioritizedReplayBuffer(self.hp.buffer_size, state_dim, alpha=alpha,
                                              beta=self.hp.beta, eps=self.hp.priority_eps)
        self.schedule = ExplorationSchedule.from_hyperparams(self.hp)
        self.t = 0

    @property
    def epsilon(self) -> float:
        return self.schedule(self.t)

    def act(self, state, eps: Optional[float] = None) -> int:
        return select_action(self.net, state, self.epsilon if eps is None else eps, self.rng)

    def _anneal_beta(self) -> None:
        hp = self.hp
        if hp.beta_final is not None and hp.total_timesteps > 0:
            frac = min(self.t / hp.total_timesteps, 1.0)
            self.buffer.beta = hp.beta + frac * (hp.beta_final - hp.beta)

    def observe(self, state, action, reward, next_state, done, truncated=False) -> Optional[float]:
        """Record one transition, advance the clock, and train when due."""
        self._anneal_beta()
        terminal = done and not (truncated and self.hp.bootstrap_on_truncation)
        self.buffer.store(state, action, reward, next_state, terminal)
        self.t += 1
        loss = None
        if self.t > self.hp.learning_starts and len(self.buffer) >= self.hp.batch_size:
            loss = td_train_step(self.net, self.target_net, self.buffer, self.hp, self.rng, self.optimizer)
        if self.t % self.hp.target_update_freq == 0:
            sync_target(self.net, self.target_net)
        return loss
