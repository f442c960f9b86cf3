"""Ownership check: score a suspect policy inside the watermark environment."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .cartpole import cartpole_meta
from .exceptions import ConfigurationError, DomainError
from .mdp import EnvMeta, EpisodeTrace, run_episode
from .watermark import LoopDescriptor, WatermarkSpec, build_env, detect_loop

MATCH = "match"
SUSPECT = "suspect"
NO_MATCH = "no-match"


@dataclass(frozen=True)
class VerifierConfig:
    """Episode count and verdict bands, in mean-episode-reward units.

    Thresholds left as ``None`` default to 0.9 and 0.1 of the best possible
    score ``c * episode_cap``.
    """

    episodes: int = 100
    match_threshold: Optional[float] = None
    reject_threshold: Optional[float] = None

    def resolve(self, spec: WatermarkSpec):
        best = spec.reward_magnitude * spec.episode_cap
        match = 0.9 * best if self.match_threshold is None else self.match_threshold
        reject = 0.1 * best if self.reject_threshold is None else self.reject_threshold
        if not reject < match:
            raise ConfigurationError(f"reject threshold {reject} must be below match threshold {match}")
        if self.episodes < 1:
            raise ConfigurationError("episodes must be >= 1")
        return match, reject


@dataclass
class VerificationReport:
    spec_name: str
    episodes_run: int
    per_episode_rewards: list
    mean_reward: float
    perfect_episodes: int
    trajectory_match_fraction: float
    verdict: str
    match_threshold: float
    reject_threshold: float
    per_episode_lengths: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def verdict_for(mean_reward: float, match_threshold: float, reject_threshold: float) -> str:
    if mean_reward >= match_threshold:
        return MATCH
    if mean_reward <= reject_threshold:
        return NO_MATCH
    return SUSPECT


def trajectory_match(trace: EpisodeTrace, loop: Optional[LoopDescriptor]) -> float:
    """Fraction of a trace's transitions that are links of the identifier loop."""
    if trace.length == 0 or loop is None:
        return 0.0
    links = {(tuple(src.tolist()), a, tuple(dst.tolist())) for src, a, dst in loop.links}
    hits = sum((tuple(np.asarray(t.state, dtype=float).tolist()), t.action,
                tuple(np.asarray(t.next_state, dtype=float).tolist())) in links
               for t in trace.transitions)
    return hits / trace.length


def _as_policy(policy, state_dim: int):
    width = getattr(policy, "state_dim", None)
    if width is not None and width != state_dim:
        raise DomainError(f"policy expects {width}-dimensional states, spec has {state_dim}")
    if hasattr(policy, "predict") and not callable(policy):
        return lambda s: int(policy.predict(np.asarray(s)[None, :])[0])
    if hasattr(policy, "greedy"):
        return policy.greedy
    return policy


def verify(policy, spec: WatermarkSpec, config: VerifierConfig = VerifierConfig(),
           main_meta: Optional[EnvMeta] = None, seed: Optional[int] = 0) -> VerificationReport:
    """Run ``config.episodes`` greedy episodes of ``policy`` in the watermark.

    ``policy`` is a :class:`~seal.dqn.network.QNetwork`, a fitted estimator with
    ``predict``, or any callable mapping a state to an action. It is only
    queried, never modified.
    """
    match, reject = config.resolve(spec)
    if main_meta is None and spec.state_dim == 4:
        main_meta = cartpole_meta()
    env = build_env(spec, main_meta, seed=seed)
    act = _as_policy(policy, spec.state_dim)
    loop = detect_loop(spec)
    best = spec.reward_magnitude * spec.episode_cap
    rewards, lengths, hits, steps = [], [], 0.0, 0
    for _ in range(config.episodes):
        trace = run_episode(env, act)
        rewards.append(trace.total_reward)
        lengths.append(trace.length)
        hits += trajectory_match(trace, loop) * trace.length
        steps += trace.length
    mean = float(np.mean(rewards))
    return VerificationReport(
        spec_name=spec.name,
        episodes_run=config.episodes,
        per_episode_rewards=rewards,
        mean_reward=mean,
        perfect_episodes=sum(r == best for r in rewards),
        trajectory_match_fraction=hits / steps if steps else 0.0,
        verdict=verdict_for(mean, match, reject),
        match_threshold=match,
        reject_threshold=reject,
        per_episode_lengths=lengths,
    )
