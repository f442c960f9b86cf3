"""Behavioural watermarking for deep Q-network policies.

A watermark is a tiny deterministic MDP whose states sit outside the main
task's observation box. Training alternates between the main task and the
watermark so one network learns both; ownership is later checked by running
a suspect policy in the watermark and scoring how well it follows the
identifier loop.
"""
from .cartpole import CartPoleEnv, CartPoleParams
from .config import RunConfig
from .dqn import DQNAgent, ExplorationSchedule, Hyperparams, PrioritizedReplayBuffer, QNetwork
from .estimator import WatermarkedDQN
from .exceptions import (ConfigurationError, DomainError, ModelFileError, SealError, TrainingFault,
                         UsageError)
from .mdp import EnvMeta, EpisodeTrace, StepOutcome, run_episode
from .modelfile import load_model, save_model
from .trainer import AlternationSchedule, JointMdp, TrainingLog, evaluate, next_phase, train
from .verifier import VerificationReport, VerifierConfig, trajectory_match, verify
from .watermark import (WatermarkEnv, WatermarkSpec, accidental_match_log_prob, build_env,
                        default_cartpole_spec, detect_loop, load_spec, save_spec, validate)

__version__ = "0.1.0"
