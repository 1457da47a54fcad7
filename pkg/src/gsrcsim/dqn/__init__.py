from gsrcsim.dqn.agent import (
    AgentState,
    Featurizer,
    LearningCurve,
    ReplayMemory,
    Trainer,
    TrainerConfig,
    TrainingDiverged,
    Transitions,
    select_action,
    td_gradient,
    td_targets,
    train,
)
from gsrcsim.dqn.network import QNetwork, rmsprop_init, rmsprop_step

__all__ = [
    "AgentState",
    "Featurizer",
    "LearningCurve",
    "QNetwork",
    "ReplayMemory",
    "Trainer",
    "TrainerConfig",
    "TrainingDiverged",
    "Transitions",
    "rmsprop_init",
    "rmsprop_step",
    "select_action",
    "td_gradient",
    "td_targets",
    "train",
]
