"""Joint training on the main task and the watermark MDP, and greedy evaluation."""
from __future__ import annotations

import copy
import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .dqn.agent import DQNAgent, Hyperparams
from .exceptions import ConfigurationError, TrainingFault
from .mdp import Environment, run_episode
from .watermark import WatermarkEnv, validate

logger = logging.getLogger(__name__)

MAIN = "main"
WATERMARK = "watermark"
LOG_HEADER = ("episode", "phase", "total_reward", "length", "epsilon", "global_step")


@dataclass(frozen=True)
class AlternationSchedule:
    """Switch to the watermark after ``f_mw`` main episodes, back after ``f_wm``."""

    f_mw: int = 10
    f_wm: int = 1

    def __post_init__(self):
        if self.f_mw < 1 or self.f_wm < 1:
            raise ConfigurationError("alternation frequencies must be >= 1")


def next_phase(schedule: AlternationSchedule, phase: str, episodes_in_phase: int):
    """Phase for the next episode and the updated in-phase counter.

    ``episodes_in_phase`` counts episodes already completed in ``phase``.
    """
    limit = schedule.f_mw if phase == MAIN else schedule.f_wm
    if episodes_in_phase >= limit:
        return (WATERMARK if phase == MAIN else MAIN), 0
    return phase, episodes_in_phase


def phase_sequence(schedule: AlternationSchedule, n_episodes: int) -> list:
    phases = []
    phase, count = MAIN, 0
    for _ in range(n_episodes):
        phase, count = next_phase(schedule, phase, count)
        phases.append(phase)
        count += 1
    return phases


class JointMdp:
    """The main environment and the watermark environment behind one phase switch.

    Because the two state spaces are disjoint, dispatching on the current
    phase is the same as dispatching on which space the state belongs to.
    With ``watermark=None`` this degenerates to plain training on the main task.
    """

    def __init__(self, main: Environment, watermark: Optional[WatermarkEnv] = None,
                 schedule: AlternationSchedule = AlternationSchedule()):
        if watermark is not None:
            report = validate(watermark.spec, main.meta, n_actions=watermark.n_actions)
            if not report.passed:
                raise ConfigurationError("watermark incompatible with main environment:\n  "
                                         + "\n  ".join(report.messages))
        self.main = main
        self.watermark = watermark
        self.schedule = schedule
        self.phase = MAIN
        self.episodes_in_phase = 0

    @property
    def state_dim(self) -> int:
        return self.main.state_dim

    @property
    def n_actions(self) -> int:
        return self.main.n_actions

    def begin_episode(self):
        if self.watermark is not None:
            self.phase, self.episodes_in_phase = next_phase(self.schedule, self.phase, self.episodes_in_phase)
        env = self.watermark if self.phase == WATERMARK else self.main
        return self.phase, env

    def end_episode(self):
        self.episodes_in_phase += 1


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    phase: str
    total_reward: float
    length: int
    epsilon: float
    global_step: int


@dataclass
class TrainingLog:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def rewards(self, phase: Optional[str] = None) -> np.ndarray:
        return np.array([r.total_reward for r in self.records if phase is None or r.phase == phase])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_HEADER)
        for r in self.records:
            w.writerow([r.episode, r.phase, repr(float(r.total_reward)), r.length,
                        repr(float(r.epsilon)), r.global_step])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def read_csv(cls, path) -> "TrainingLog":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        return cls([EpisodeRecord(int(r["episode"]), r["phase"], float(r["total_reward"]),
                                  int(r["length"]), float(r["epsilon"]), int(r["global_step"]))
                    for r in rows])


def _greedy_score(net, joint: JointMdp, episodes: int, seed: int) -> float:
    """Mean greedy return on private copies of the joint MDP's environments."""
    main = copy.deepcopy(joint.main)
    score, _ = evaluate(net.greedy, main, episodes, seed=seed)
    if joint.watermark is not None:
        wm = copy.deepcopy(joint.watermark)
        score += evaluate(net.greedy, wm, 1, seed=seed)[0]
    return score


def train(joint: JointMdp, agent: DQNAgent, hp: Optional[Hyperparams] = None,
          checkpoint_freq: Optional[int] = None, checkpoint_episodes: int = 5,
          checkpoint_seed: int = 2**31 - 1,
          callback: Optional[Callable[[EpisodeRecord], None]] = None):
    """Run DQN on the joint MDP until the step budget is spent.

    The budget counts steps in both environments and the last episode is
    always played to completion. Switching happens only between episodes and
    all transitions go into the agent's single replay buffer.

    With ``checkpoint_freq`` set, the greedy policy is scored every that many
    steps (main-task mean over ``checkpoint_episodes`` episodes plus one
    watermark episode) on environment copies seeded from ``checkpoint_seed``.
    The best-scoring parameters replace the final ones if they score
    strictly higher. The training log is unaffected.
    """
    hp = hp if hp is not None else agent.hp
    log = TrainingLog()
    best_score, best_params = -np.inf, None
    episode = 0
    while agent.t < hp.total_timesteps:
        phase, env = joint.begin_episode()
        state = env.reset()
        total, length, done = 0.0, 0, False
        while not done:
            action = agent.act(state)
            out = env.step(action)
            try:
                agent.observe(state, action, out.reward, out.next_state, out.done, out.truncated)
            except TrainingFault as fault:
                fault.log = log
                raise
            total += out.reward
            length += 1
            state, done = out.next_state, out.done
            if checkpoint_freq and agent.t % checkpoint_freq == 0 and agent.t > hp.learning_starts:
                score = _greedy_score(agent.net, joint, checkpoint_episodes, checkpoint_seed)
                if score >= best_score:
                    best_score, best_params = score, agent.net.flat.copy()
                    logger.debug("step %d: checkpoint score %.1f", agent.t, score)
        joint.end_episode()
        rec = EpisodeRecord(episode, phase, total, length, agent.epsilon, agent.t)
        log.records.append(rec)
        if callback is not None:
            callback(rec)
        episode += 1
    if best_params is not None:
        final = _greedy_score(agent.net, joint, checkpoint_episodes, checkpoint_seed)
        if best_score > final:
            agent.net.flat[...] = best_params
            logger.info("restored checkpoint scoring %.1f (final weights scored %.1f)", best_score, final)
    return agent.net, log


def evaluate(policy, env: Environment, episodes: int = 100, seed: Optional[int] = 0):
    """Mean and per-episode total reward of a greedy policy over fresh episodes."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    env.seed(seed)
    rewards = [run_episode(env, policy).total_reward for _ in range(episodes)]
    return float(np.mean(rewards)), rewards
