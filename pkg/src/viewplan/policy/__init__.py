from .model import ActPolicy, ModelConfig, chunk_loss, policy_input_from_observation
from .train import Checkpoint, infer_chunk, infer_chunk_normalized, load_checkpoint, save_checkpoint, train

__all__ = [
    "ActPolicy",
    "ModelConfig",
    "chunk_loss",
    "policy_input_from_observation",
    "Checkpoint",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    "infer_chunk",
    "infer_chunk_normalized",
]
