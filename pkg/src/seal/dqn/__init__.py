from .agent import (DQNAgent, ExplorationSchedule, Hyperparams, select_action, sync_target,
                    td_loss_and_grads, td_train_step)
from .network import Adam, QNetwork, q_values
from .replay import PrioritizedReplayBuffer

__all__ = ["Adam", "DQNAgent", "ExplorationSchedule", "Hyperparams", "PrioritizedReplayBuffer",
           "QNetwork", "q_values", "select_action", "sync_target", "td_loss_and_grads", "td_train_step"]
