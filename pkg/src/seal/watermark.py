"""Watermark MDP: declarative spec, compatibility checks, and the runnable environment.

The watermark environment is a small deterministic MDP whose states lie
outside the main task's observation box. Each non-terminal state has exactly
one rewarded action (a *link*); any other action ends the episode in the
terminal state with the negated reward. Chaining links into a cycle gives
the identifier sequence a trained policy will follow.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .exceptions import ConfigurationError
from .mdp import Environment, EnvMeta

SPEC_VERSION = 1
ANGLE_COORDS = (2, 3)
_SPEC_FIELDS = {"version", "state_dim", "states", "links", "terminal", "reward_magnitude",
                "episode_cap", "initial_state", "angle_units"}

CONDITIONS = {
    1: "state spaces are disjoint",
    2: "state dimensions are equal",
    3: "action spaces are equal",
    4: "dynamics and rewards are deterministic",
    5: "episode caps are equal",
}


@dataclass(frozen=True)
class Link:
    source: int
    action: int
    dest: int


@dataclass(frozen=True)
class WatermarkSpec:
    """Immutable description of a watermark MDP.

    State values are kept exactly as authored; when ``angle_units`` is
    ``"degrees"`` and the spec is cart-pole shaped (4 coordinates), the angle
    coordinates are converted to radians by :meth:`state_vectors`.
    """

    state_dim: int
    state_names: tuple
    state_values: tuple
    links: tuple
    terminal_name: str
    terminal_values: tuple
    reward_magnitude: float = 1.0
    episode_cap: int = 500
    initial_state_index: int = 0
    angle_units: str = "radians"
    name: str = "watermark"

    @property
    def n_states(self) -> int:
        return len(self.state_values)

    def index(self, name: str) -> int:
        try:
            return self.state_names.index(name)
        except ValueError:
            raise KeyError(f"no state named {name!r}") from None

    def _to_internal(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float).copy()
        if self.angle_units == "degrees" and self.state_dim == 4 and v.shape == (4,):
            idx = list(ANGLE_COORDS)
            v[idx] = np.radians(v[idx])
        return v

    def state_vectors(self) -> list:
        """Non-terminal states in internal (radian) units."""
        return [self._to_internal(v) for v in self.state_values]

    def terminal_vector(self) -> np.ndarray:
        return self._to_internal(self.terminal_values)

    def required_action(self, index: int) -> Optional[int]:
        for link in self.links:
            if link.source == index:
                return link.action
        return None

    def link_from(self, index: int) -> Optional[Link]:
        for link in self.links:
            if link.source == index:
                return link
        return None


def default_cartpole_spec() -> WatermarkSpec:
    """The four-state looping identifier for the cart-pole task.

    State[i] pays +1 for action ``i % 2`` and moves to State[i % 4 + 1]; every
    state sits just beyond the cart-pole observation box.
    """
    values = ((-5.0, 0.0, -25.0, 0.0),
              (-5.0, 0.0, 25.0, 0.0),
              (5.0, 0.0, -25.0, 0.0),
              (5.0, 0.0, 25.0, 0.0))
    names = tuple(f"State[{i}]" for i in range(1, 5))
    links = tuple(Link(source=i - 1, action=i % 2, dest=i % 4) for i in range(1, 5))
    return WatermarkSpec(
        state_dim=4, state_names=names, state_values=values, links=links,
        terminal_name="Terminal", terminal_values=(-6.0, 0.0, -26.0, 0.0),
        reward_magnitude=1.0, episode_cap=500, initial_state_index=0,
        angle_units="degrees", name="cartpole-default",
    )


# -- validation ---------------------------------------------------------------

@dataclass
class ValidationReport:
    conditions: dict = field(default_factory=lambda: {k: True for k in CONDITIONS})
    messages: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.conditions.values())

    def fail(self, condition: int, message: str) -> None:
        self.conditions[condition] = False
        self.messages.append(f"condition {condition} ({CONDITIONS[condition]}): {message}")

    def __bool__(self):
        return self.passed


def validate(spec: WatermarkSpec, main_meta: EnvMeta, n_actions: Optional[int] = None) -> ValidationReport:
    """Check ``spec`` against the main environment's metadata.

    Failures are collected in the report rather than raised. ``n_actions``
    is the watermark environment's action count and defaults to the main
    environment's, which is how :func:`build_env` constructs it.
    """
    report = ValidationReport()
    if n_actions is None:
        n_actions = main_meta.n_actions

    # condition 2
    if spec.state_dim != main_meta.state_dim:
        report.fail(2, f"watermark state_dim {spec.state_dim} != main state_dim {main_meta.state_dim}")
    all_values = list(spec.state_values) + [spec.terminal_values]
    all_names = list(spec.state_names) + [spec.terminal_name]
    shapes_ok = True
    for name, values in zip(all_names, all_values):
        if len(values) != spec.state_dim:
            report.fail(2, f"state {name!r} has {len(values)} coordinates, expected {spec.state_dim}")
            shapes_ok = False
        elif not all(math.isfinite(float(v)) for v in values):
            report.fail(2, f"state {name!r} has a non-finite coordinate")
            shapes_ok = False

    # condition 1
    if shapes_ok:
        vectors = spec.state_vectors() + [spec.terminal_vector()]
        if spec.state_dim == main_meta.state_dim:
            for name, v in zip(all_names, vectors):
                if main_meta.contains(v):
                    report.fail(1, f"state {name!r} lies inside the main observation bounds")
        seen = {}
        for name, v in zip(all_names, vectors):
            key = tuple(v.tolist())
            if key in seen:
                report.fail(4, f"states {seen[key]!r} and {name!r} are identical")
            seen.setdefault(key, name)

    # condition 3
    if n_actions != main_meta.n_actions:
        report.fail(3, f"watermark has {n_actions} actions, main environment has {main_meta.n_actions}")
    for link in spec.links:
        if not 0 <= link.action < main_meta.n_actions:
            report.fail(3, f"link from index {link.source} uses action {link.action} "
                           f"outside {{0..{main_meta.n_actions - 1}}}")

    # condition 4
    n = spec.n_states
    if not (spec.reward_magnitude > 0 and math.isfinite(spec.reward_magnitude)):
        report.fail(4, f"reward magnitude must be finite and > 0, got {spec.reward_magnitude}")
    if n == 0:
        report.fail(4, "spec has no non-terminal states")
    if not 0 <= spec.initial_state_index < max(n, 1):
        report.fail(4, f"initial state index {spec.initial_state_index} out of range")
    out_degree = [0] * n
    for link in spec.links:
        if not 0 <= link.source < n:
            report.fail(4, f"link source index {link.source} is not a non-terminal state")
            continue
        if not 0 <= link.dest < n:
            report.fail(4, f"link destination index {link.dest} is not a non-terminal state")
        out_degree[link.source] += 1
    for i, k in enumerate(out_degree):
        if k != 1:
            report.fail(4, f"state {spec.state_names[i]!r} is the source of {k} links, expected exactly 1")
    if len(set(spec.state_names)) != n or spec.terminal_name in spec.state_names:
        report.fail(4, "state names must be unique")

    # condition 5
    if spec.episode_cap != main_meta.max_steps:
        report.fail(5, f"episode cap {spec.episode_cap} != main environment cap {main_meta.max_steps}")
    return report


# -- environment --------------------------------------------------------------

class WatermarkEnv(Environment):
    """Deterministic environment compiled from a :class:`WatermarkSpec`."""

    def __init__(self, spec: WatermarkSpec, n_actions: int = 2, obs_low=(), obs_high=(),
                 seed: Optional[int] = None):
        super().__init__(seed)
        self.spec = spec
        self._vectors = spec.state_vectors()
        self._terminal = spec.terminal_vector()
        self._required = [spec.required_action(i) for i in range(spec.n_states)]
        self._dest = [spec.link_from(i).dest for i in range(spec.n_states)]
        self._meta = EnvMeta(spec.state_dim, n_actions, spec.episode_cap, tuple(obs_low), tuple(obs_high))
        self._index = None
        self.c = float(spec.reward_magnitude)

    @property
    def meta(self) -> EnvMeta:
        return self._meta

    @property
    def current_index(self) -> Optional[int]:
        """Index of the current state, or ``None`` once in the terminal state."""
        return self._index

    def _reset(self):
        self._index = self.spec.initial_state_index
        return self._vectors[self._index]

    def _transition(self, action):
        i = self._index
        if i is not None and action == self._required[i]:
            self._index = self._dest[i]
            return self._vectors[self._index], self.c, False
        self._index = None
        return self._terminal, -self.c, True

    def optimal_policy(self):
        """Policy that plays the rewarded action in every spec state."""
        lookup = {tuple(v.tolist()): a for v, a in zip(self._vectors, self._required)}

        def policy(state):
            return lookup.get(tuple(np.asarray(state, dtype=float).tolist()), 0)
        return policy


def build_env(spec: WatermarkSpec, main_meta: Optional[EnvMeta] = None,
              seed: Optional[int] = None) -> WatermarkEnv:
    """Compile ``spec`` into an environment, refusing invalid specs.

    Without ``main_meta`` only the structural checks (links, rewards, shapes)
    are enforced, against a synthetic meta built from the spec itself;
    disjointness needs the main environment and is skipped.
    """
    if main_meta is None:
        n_actions = max((l.action for l in spec.links), default=0) + 1
        n_actions = max(n_actions, 2)
        probe = EnvMeta(spec.state_dim, n_actions, spec.episode_cap)
    else:
        probe = main_meta
    report = validate(spec, probe)
    failed = [k for k, ok in report.conditions.items() if not ok and (main_meta is not None or k != 1)]
    if failed:
        raise ConfigurationError("invalid watermark spec:\n  " + "\n  ".join(report.messages))
    return WatermarkEnv(spec, n_actions=probe.n_actions, obs_low=probe.obs_low,
                        obs_high=probe.obs_high, seed=seed)


# -- loop analysis ------------------------------------------------------------

@dataclass(frozen=True)
class LoopDescriptor:
    cycle: tuple          # state indices, in traversal order
    names: tuple
    pivot: int            # first cycle state reached from the initial state
    links: tuple          # (source vector, action, dest vector) per cycle step, internal units

    @property
    def length(self) -> int:
        return len(self.cycle)


def detect_loop(spec: WatermarkSpec) -> Optional[LoopDescriptor]:
    """Follow links from the initial state and return the cycle they close.

    Returns ``None`` (with a warning) when the chain dead-ends, in which case
    verifying the spec needs chains as long as the episode cap.
    """
    order = []
    pos = {}
    i = spec.initial_state_index
    while i is not None and i not in pos:
        pos[i] = len(order)
        order.append(i)
        link = spec.link_from(i)
        i = link.dest if link is not None else None
    if i is None:
        warnings.warn(f"watermark spec {spec.name!r} has no identifier loop", stacklevel=2)
        return None
    cycle = tuple(order[pos[i]:])
    vecs = spec.state_vectors()
    links = tuple((vecs[s], spec.link_from(s).action, vecs[spec.link_from(s).dest]) for s in cycle)
    return LoopDescriptor(cycle=cycle, names=tuple(spec.state_names[s] for s in cycle),
                          pivot=cycle[0], links=links)


def accidental_match_log_prob(spec: WatermarkSpec, action_count: int) -> float:
    """Log-probability that a uniform random policy survives a full episode.

    Each state admits one rewarded action, so surviving ``episode_cap``
    steps has probability ``(1 / action_count) ** episode_cap``.
    """
    return spec.episode_cap * math.log(1.0 / action_count)


# -- spec files ---------------------------------------------------------------

def spec_to_dict(spec: WatermarkSpec) -> dict:
    names = spec.state_names
    return {
        "version": SPEC_VERSION,
        "state_dim": spec.state_dim,
        "states": [{"name": n, "values": list(v)} for n, v in zip(names, spec.state_values)],
        "links": [{"from": names[l.source], "action": l.action, "to": names[l.dest]} for l in spec.links],
        "terminal": {"name": spec.terminal_name, "values": list(spec.terminal_values)},
        "reward_magnitude": spec.reward_magnitude,
        "episode_cap": spec.episode_cap,
        "initial_state": names[spec.initial_state_index],
        "angle_units": spec.angle_units,
    }


def _require(cond, message):
    if not cond:
        raise ConfigurationError(message)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def spec_from_dict(data: dict, name: str = "watermark") -> WatermarkSpec:
    _require(isinstance(data, dict), "spec must be a JSON object")
    unknown = set(data) - _SPEC_FIELDS
    _require(not unknown, f"unknown spec fields: {sorted(unknown)}")
    missing = _SPEC_FIELDS - set(data)
    _require(not missing, f"missing spec fields: {sorted(missing)}")
    _require(data["version"] == SPEC_VERSION,
             f"unsupported spec version {data['version']!r} (expected {SPEC_VERSION})")
    _require(data["angle_units"] in ("degrees", "radians"),
             f"angle_units must be 'degrees' or 'radians', got {data['angle_units']!r}")
    _require(isinstance(data["state_dim"], int) and data["state_dim"] > 0, "state_dim must be a positive integer")
    _require(isinstance(data["episode_cap"], int) and data["episode_cap"] > 0,
             "episode_cap must be a positive integer")
    _require(_is_num(data["reward_magnitude"]), "reward_magnitude must be a number")

    def parse_state(obj, where):
        _require(isinstance(obj, dict) and set(obj) == {"name", "values"},
                 f"{where} must be an object with exactly 'name' and 'values'")
        _require(isinstance(obj["name"], str), f"{where}.name must be a string")
        _require(isinstance(obj["values"], list) and all(_is_num(v) for v in obj["values"]),
                 f"{where}.values must be an array of numbers")
        return obj["name"], tuple(float(v) for v in obj["values"])

    _require(isinstance(data["states"], list), "states must be an array")
    states = [parse_state(s, f"states[{i}]") for i, s in enumerate(data["states"])]
    names = tuple(n for n, _ in states)
    _require(len(set(names)) == len(names), "state names must be unique")
    terminal_name, terminal_values = parse_state(data["terminal"], "terminal")
    index = {n: i for i, n in enumerate(names)}

    _require(isinstance(data["links"], list), "links must be an array")
    links = []
    for i, obj in enumerate(data["links"]):
        _require(isinstance(obj, dict) and set(obj) == {"from", "action", "to"},
                 f"links[{i}] must be an object with exactly 'from', 'action', 'to'")
        _require(obj["from"] in index, f"links[{i}].from names unknown state {obj['from']!r}")
        _require(obj["to"] in index, f"links[{i}].to names unknown state {obj['to']!r}")
        _require(isinstance(obj["action"], int) and not isinstance(obj["action"], bool)
                 and obj["action"] >= 0, f"links[{i}].action must be a non-negative integer")
        links.append(Link(index[obj["from"]], obj["action"], index[obj["to"]]))
    _require(data["initial_state"] in index, f"initial_state names unknown state {data['initial_state']!r}")

    return WatermarkSpec(
        state_dim=data["state_dim"], state_names=names, state_values=tuple(v for _, v in states),
        links=tuple(links), terminal_name=terminal_name, terminal_values=terminal_values,
        reward_magnitude=float(data["reward_magnitude"]), episode_cap=data["episode_cap"],
        initial_state_index=index[data["initial_state"]], angle_units=data["angle_units"], name=name,
    )


def save_spec(spec: WatermarkSpec, path) -> None:
    Path(path).write_text(json.dumps(spec_to_dict(spec), indent=2) + "\n", encoding="utf-8")


def load_spec(path) -> WatermarkSpec:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: not valid JSON ({exc})") from None
    return spec_from_dict(data, name=path.stem)
