from .batching import Batch, collate, sequences_to_teacher
from .loop import (
    DataBundle,
    TrainConfig,
    TrainingDiverged,
    cosine_lr,
    evaluate,
    state_hash,
    teacher_accuracy,
    train_stage,
    train_vqg,
)
from .losses import localization_loss, localization_targets, next_token_accuracy, xe_loss
from .rewards import RewardBundle, RewardComputer
from .scst import regenerate_questions, scst_step, scst_switched_step

__all__ = [
    "Batch",
    "DataBundle",
    "RewardBundle",
    "RewardComputer",
    "TrainConfig",
    "TrainingDiverged",
    "collate",
    "cosine_lr",
    "evaluate",
    "localization_loss",
    "localization_targets",
    "next_token_accuracy",
    "regenerate_questions",
    "scst_step",
    "scst_switched_step",
    "sequences_to_teacher",
    "state_hash",
    "teacher_accuracy",
    "train_stage",
    "train_vqg",
    "xe_loss",
]
