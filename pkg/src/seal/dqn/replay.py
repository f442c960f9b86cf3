"""Proportional prioritized replay over a fixed-size ring."""
from __future__ import annotations

import numpy as np

from ..exceptions import UsageError


class PrioritizedReplayBuffer:
    """Ring buffer whose entries are sampled with probability ``p_i**alpha / sum``.

    New transitions get the largest priority seen so far so each is replayed
    at least once with high probability. Priorities are floored at
    ``eps`` to keep every entry sampleable.
    """

    def __init__(self, capacity: int, state_dim: int, alpha: float = 0.6, beta: float = 0.4,
                 eps: float = 1e-6):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.alpha = alpha
        self.beta = beta
        self.eps = eps
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)
        # priority ** alpha, the sampling weight
        self.weights = np.zeros(capacity)
        self.max_priority = 1.0
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def store(self, state, action, reward, next_state, done) -> int:
        i = self._next
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = float(done)
        self.weights[i] = self.max_priority ** self.alpha
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)
        return i

    def probabilities(self) -> np.ndarray:
        w = self.weights[:self._size]
        return w / w.sum()

    def sample(self, batch_size: int, rng: np.random.Generator):
        """Return ``(batch, importance_weights, indices)``.

        ``batch`` is a dict of arrays; importance weights are
        ``(N * P(i)) ** -beta`` scaled so the batch maximum is 1.
        """
        n = self._size
        if n < batch_size:
            raise UsageError(f"cannot sample {batch_size} from a buffer holding {n}")
        cdf = np.cumsum(self.weights[:n])
        total = cdf[-1]
        u = rng.random(batch_size) * total
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), n - 1)
        probs = self.weights[idx] / total
        iw = (n * probs) ** (-self.beta)
        iw /= iw.max()
        batch = {
            "states": self.states[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_states": self.next_states[idx],
            "dones": self.dones[idx],
        }
        return batch, iw, idx

    def update_priorities(self, indices, priorities) -> None:
        p = np.maximum(np.asarray(priorities, dtype=float), self.eps)
        self.weights[indices] = p ** self.alpha
        self.max_priority = max(self.max_priority, float(p.max()))
