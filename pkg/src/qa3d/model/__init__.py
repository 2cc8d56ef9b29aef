from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ModelConfig
from .net import EncodedScene, QATransformer, sinusoidal_positions, swap_for_vqg

__all__ = [
    "CheckpointError",
    "EncodedScene",
    "ModelConfig",
    "QATransformer",
    "load_checkpoint",
    "save_checkpoint",
    "sinusoidal_positions",
    "swap_for_vqg",
]
