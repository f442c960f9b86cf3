"""Fully-connected Q-network with hand-written backprop, plus Adam."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..exceptions import DomainError


class QNetwork:
    """ReLU multilayer perceptron mapping a state to one Q-value per action.

    ``params`` is the list ``[W0, b0, W1, b1, ...]`` with ``W`` shaped
    ``(fan_in, fan_out)``; every entry is a view into the single vector
    ``flat`` so optimizers can update all parameters at once.
    """

    activation = "relu"

    def __init__(self, state_dim: int, n_actions: int, hidden_sizes: Sequence[int] = (128, 128),
                 rng: Optional[np.random.Generator] = None, zero: bool = False):
        self.state_dim = int(state_dim)
        self.n_actions = int(n_actions)
        self.hidden_sizes = tuple(int(h) for h in hidden_sizes)
        rng = rng if rng is not None else np.random.default_rng()
        sizes = (self.state_dim,) + self.hidden_sizes + (self.n_actions,)
        shapes = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            shapes += [(fan_in, fan_out), (fan_out,)]
        self._bind(np.zeros(sum(int(np.prod(s)) for s in shapes)), shapes)
        if not zero:
            for k in range(self.n_layers):
                W, b = self.params[2 * k], self.params[2 * k + 1]
                bound = 1.0 / np.sqrt(W.shape[0])
                W[...] = rng.uniform(-bound, bound, size=W.shape)
                b[...] = rng.uniform(-bound, bound, size=b.shape)

    def _bind(self, flat, shapes):
        """Adopt ``flat`` as parameter storage and expose per-layer views."""
        self.flat = flat
        self.params = []
        offset = 0
        for shape in shapes:
            size = int(np.prod(shape))
            self.params.append(flat[offset:offset + size].reshape(shape))
            offset += size

    @property
    def n_layers(self) -> int:
        return len(self.params) // 2

    @property
    def shapes(self):
        return [p.shape for p in self.params]

    def copy(self) -> "QNetwork":
        clone = QNetwork.__new__(QNetwork)
        clone.state_dim = self.state_dim
        clone.n_actions = self.n_actions
        clone.hidden_sizes = self.hidden_sizes
        clone._bind(self.flat.copy(), self.shapes)
        return clone

    def load_params(self, params) -> None:
        if [np.shape(p) for p in params] != self.shapes:
            raise DomainError("parameter shapes do not match the network")
        for dst, src in zip(self.params, params):
            dst[...] = src

    def flatten_grads(self, grads) -> np.ndarray:
        return np.concatenate([np.ravel(g) for g in grads])

    def _check_input(self, states) -> np.ndarray:
        X = np.asarray(states, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.state_dim:
            raise DomainError(f"expected states of width {self.state_dim}, got shape {np.shape(states)}")
        return X

    def forward(self, states) -> np.ndarray:
        """Q-values for a batch ``(n, state_dim)``; returns ``(n, n_actions)``."""
        h = self._check_input(states)
        last = self.n_layers - 1
        for k in range(self.n_layers):
            h = h @ self.params[2 * k] + self.params[2 * k + 1]
            if k < last:
                h = np.maximum(h, 0.0)
        return h

    def forward_cached(self, states):
        h = self._check_input(states)
        acts = [h]
        last = self.n_layers - 1
        for k in range(self.n_layers):
            h = h @ self.params[2 * k] + self.params[2 * k + 1]
            if k < last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return h, acts

    def backward(self, acts, grad_out) -> list:
        """Parameter gradients given the cache from :meth:`forward_cached`."""
        grads = [None] * len(self.params)
        g = grad_out
        for k in range(self.n_layers - 1, -1, -1):
            grads[2 * k] = acts[k].T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            if k > 0:
                g = (g @ self.params[2 * k].T) * (acts[k] > 0)
        return grads

    def greedy(self, state) -> int:
        return int(np.argmax(self.forward(state)[0]))

    __call__ = greedy


def q_values(net: QNetwork, state) -> np.ndarray:
    """Q-vector for a single state."""
    s = np.asarray(state, dtype=float)
    if s.shape != (net.state_dim,):
        raise DomainError(f"state must have shape ({net.state_dim},), got {s.shape}")
    return net.forward(s)[0]


class Adam:
    """Adam over a single flat parameter vector, updated in place."""

    def __init__(self, size: int, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, flat: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        lr_t = self.lr * np.sqrt(1 - b2 ** self.t) / (1 - b1 ** self.t)
        m, v = self.m, self.v
        m *= b1
        m += (1 - b1) * grad
        v *= b2
        g2 = grad * grad
        g2 *= 1 - b2
        v += g2
        denom = np.sqrt(v)
        denom += self.eps
        np.divide(m, denom, out=denom)
        denom *= lr_t
        flat -= denom
