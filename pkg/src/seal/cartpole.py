"""Cart-pole balancing task, integrated with explicit Euler steps."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .exceptions import ConfigurationError
from .mdp import Environment, EnvMeta

X_THRESHOLD = 2.4
THETA_THRESHOLD = math.radians(12.0)
X_OBS_BOUND = 4.8
THETA_OBS_BOUND = math.radians(24.0)
MAX_STEPS = 500


@dataclass(frozen=True)
class CartPoleParams:
    gravity: float = 9.8
    cart_mass: float = 1.0
    pole_mass: float = 0.1
    half_length: float = 0.5
    force_mag: float = 10.0
    tau: float = 0.02

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigurationError(f"CartPoleParams.{f.name} must be positive, got {v}")


def dynamics(state, action: int, params: CartPoleParams = CartPoleParams()):
    """One Euler step of the cart-pole equations of motion.

    ``state`` is ``(x, x_dot, theta, theta_dot)`` with the angle in radians;
    action 0 pushes left, action 1 pushes right.
    """
    x, x_dot, theta, theta_dot = state
    force = params.force_mag if action == 1 else -params.force_mag
    total_mass = params.cart_mass + params.pole_mass
    pml = params.pole_mass * params.half_length
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)

    temp = (force + pml * theta_dot * theta_dot * sin_t) / total_mass
    theta_acc = (params.gravity * sin_t - cos_t * temp) / (
        params.half_length * (4.0 / 3.0 - params.pole_mass * cos_t * cos_t / total_mass))
    x_acc = temp - pml * theta_acc * cos_t / total_mass

    tau = params.tau
    return (x + tau * x_dot,
            x_dot + tau * x_acc,
            theta + tau * theta_dot,
            theta_dot + tau * theta_acc)


def failed(state) -> bool:
    x, _, theta, _ = state
    return abs(x) > X_THRESHOLD or abs(theta) > THETA_THRESHOLD


class CartPoleEnv(Environment):
    """The main task: keep the pole upright for up to 500 steps, +1 per step."""

    def __init__(self, seed: Optional[int] = None, params: CartPoleParams = CartPoleParams(),
                 init_noise: float = 0.05, max_steps: int = MAX_STEPS):
        super().__init__(seed)
        self.params = params
        self.init_noise = init_noise
        self._meta = EnvMeta(
            state_dim=4, n_actions=2, max_steps=max_steps,
            obs_low=(-X_OBS_BOUND, -math.inf, -THETA_OBS_BOUND, -math.inf),
            obs_high=(X_OBS_BOUND, math.inf, THETA_OBS_BOUND, math.inf),
        )

    @property
    def meta(self) -> EnvMeta:
        return self._meta

    def _reset(self):
        if self.init_noise == 0:
            return (0.0, 0.0, 0.0, 0.0)
        return tuple(float(v) for v in self.rng.uniform(-self.init_noise, self.init_noise, size=4))

    def _transition(self, action):
        nxt = dynamics(self._state, action, self.params)
        return nxt, 1.0, failed(nxt)


def cartpole_meta() -> EnvMeta:
    return CartPoleEnv().meta
