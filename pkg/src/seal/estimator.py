"""Scikit-learn style front end for joint watermark training."""
from __future__ import annotations

import logging
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .cartpole import CartPoleEnv
from .config import RunConfig
from .dqn.agent import DQNAgent, Hyperparams
from .dqn.network import QNetwork
from .exceptions import DomainError
from .trainer import AlternationSchedule, JointMdp, evaluate, train
from .verifier import VerifierConfig, verify
from .watermark import WatermarkSpec, build_env, default_cartpole_spec

logger = logging.getLogger(__name__)


class WatermarkedDQN(BaseEstimator):
    """DQN trained on cart-pole, optionally interleaved with a watermark MDP.

    ``fit`` ignores ``X``: training data comes from the environments. After
    fitting, ``predict`` maps a batch of states to greedy actions and
    ``decision_function`` returns the Q-values.

    Parameters mirror :class:`~seal.dqn.agent.Hyperparams`; ``watermark_spec``
    of ``None`` means the default cart-pole identifier, and
    ``watermark=False`` trains a nominal policy on the main task only.
    """

    def __init__(self, total_timesteps=100_000, gamma=0.99, learning_rate=1e-3,
                 buffer_size=50_000, learning_starts=1000, target_update_freq=500,
                 exploration_fraction=0.1, exploration_final_eps=0.02, batch_size=32,
                 hidden_sizes=(128, 128), prioritized_replay=True, alpha=0.6, beta=0.4,
                 grad_norm_clip=10.0, bootstrap_on_truncation=True,
                 watermark=True, watermark_spec: Optional[WatermarkSpec] = None,
                 f_mw=10, f_wm=1, checkpoint_freq=5000, random_state=0):
        self.total_timesteps = total_timesteps
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.buffer_size = buffer_size
        self.learning_starts = learning_starts
        self.target_update_freq = target_update_freq
        self.exploration_fraction = exploration_fraction
        self.exploration_final_eps = exploration_final_eps
        self.batch_size = batch_size
        self.hidden_sizes = hidden_sizes
        self.prioritized_replay = prioritized_replay
        self.alpha = alpha
        self.beta = beta
        self.grad_norm_clip = grad_norm_clip
        self.bootstrap_on_truncation = bootstrap_on_truncation
        self.watermark = watermark
        self.watermark_spec = watermark_spec
        self.f_mw = f_mw
        self.f_wm = f_wm
        self.checkpoint_freq = checkpoint_freq
        self.random_state = random_state

    @classmethod
    def from_run_config(cls, config: RunConfig, spec: Optional[WatermarkSpec] = None) -> "WatermarkedDQN":
        hp = config.hyperparams
        return cls(total_timesteps=hp.total_timesteps, gamma=hp.gamma, learning_rate=hp.learning_rate,
                   buffer_size=hp.buffer_size, learning_starts=hp.learning_starts,
                   target_update_freq=hp.target_update_freq, exploration_fraction=hp.exploration_fraction,
                   exploration_final_eps=hp.exploration_final_eps, batch_size=hp.batch_size,
                   hidden_sizes=hp.hidden_sizes, prioritized_replay=hp.prioritized_replay,
                   alpha=hp.alpha, beta=hp.beta, grad_norm_clip=hp.grad_norm_clip,
                   bootstrap_on_truncation=hp.bootstrap_on_truncation,
                   watermark=config.watermark, watermark_spec=spec, f_mw=config.f_mw, f_wm=config.f_wm,
                   checkpoint_freq=config.checkpoint_freq, random_state=config.seed)

    def run_config(self) -> RunConfig:
        hp = Hyperparams(
            total_timesteps=self.total_timesteps, gamma=self.gamma, learning_rate=self.learning_rate,
            buffer_size=self.buffer_size, learning_starts=self.learning_starts,
            target_update_freq=self.target_update_freq, exploration_fraction=self.exploration_fraction,
            exploration_final_eps=self.exploration_final_eps, batch_size=self.batch_size,
            hidden_sizes=tuple(self.hidden_sizes), prioritized_replay=self.prioritized_replay,
            alpha=self.alpha, beta=self.beta, grad_norm_clip=self.grad_norm_clip,
            bootstrap_on_truncation=self.bootstrap_on_truncation)
        return RunConfig(hyperparams=hp, f_mw=self.f_mw, f_wm=self.f_wm, seed=self.random_state,
                         watermark=self.watermark, checkpoint_freq=self.checkpoint_freq)

    def _spec(self) -> Optional[WatermarkSpec]:
        if not self.watermark:
            return None
        return self.watermark_spec if self.watermark_spec is not None else default_cartpole_spec()

    def fit(self, X=None, y=None, callback=None):
        config = self.run_config()
        seed = config.seed
        main = CartPoleEnv(seed=seed)
        spec = self._spec()
        wm_env = build_env(spec, main.meta) if spec is not None else None
        joint = JointMdp(main, wm_env, AlternationSchedule(self.f_mw, self.f_wm))
        agent = DQNAgent(main.state_dim, main.n_actions, config.hyperparams, seed=seed)
        self.q_network_, self.training_log_ = train(
            joint, agent, checkpoint_freq=self.checkpoint_freq, callback=callback)
        self.watermark_spec_ = spec
        self.n_features_in_ = main.state_dim
        self.n_actions_ = main.n_actions
        return self

    @classmethod
    def from_network(cls, net: QNetwork, spec: Optional[WatermarkSpec] = None, **params) -> "WatermarkedDQN":
        """Wrap an already trained network, e.g. one loaded from a model file."""
        est = cls(hidden_sizes=net.hidden_sizes, watermark_spec=spec, watermark=spec is not None, **params)
        est.q_network_ = net
        est.training_log_ = None
        est.watermark_spec_ = spec
        est.n_features_in_ = net.state_dim
        est.n_actions_ = net.n_actions
        return est

    def _validate_states(self, X) -> np.ndarray:
        check_is_fitted(self, "q_network_")
        X = check_array(X, dtype=np.float64, ensure_all_finite=True)
        if X.shape[1] != self.n_features_in_:
            raise DomainError(f"X has {X.shape[1]} features, the policy expects {self.n_features_in_}")
        return X

    def decision_function(self, X) -> np.ndarray:
        """Q-values, shape ``(n_samples, n_actions)``."""
        X = self._validate_states(X)
        return self.q_network_.forward(X)

    def predict(self, X) -> np.ndarray:
        """Greedy actions; ties go to the lowest action index."""
        return np.argmax(self.decision_function(X), axis=1)

    def evaluate(self, env: str = "cartpole", episodes: int = 100, seed: int = 12345) -> float:
        """Mean greedy episode reward on ``"cartpole"`` or ``"watermark"``."""
        check_is_fitted(self, "q_network_")
        if env == "cartpole":
            target = CartPoleEnv()
        elif env == "watermark":
            spec = self.watermark_spec_ or self.watermark_spec or default_cartpole_spec()
            target = build_env(spec, CartPoleEnv().meta)
        else:
            raise ValueError(f"unknown environment {env!r}")
        mean, _ = evaluate(self.q_network_.greedy, target, episodes, seed=seed)
        return mean

    def verify(self, spec: Optional[WatermarkSpec] = None, config: VerifierConfig = VerifierConfig(),
               seed: int = 0):
        check_is_fitted(self, "q_network_")
        spec = spec or self.watermark_spec_ or default_cartpole_spec()
        return verify(self.q_network_, spec, config, seed=seed)
