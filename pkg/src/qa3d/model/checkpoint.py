"""Versioned checkpoint container.

Stores the model config, role, a vocabulary digest, and the parameter
tensors (including the frozen embedding table, so a checkpoint is
self-contained given the matching vocabulary). Loading refuses config or
vocabulary mismatches instead of silently reindexing tokens.
"""

from __future__ import annotations

import torch

from ..data.vocab import Vocabulary
from .config import ModelConfig
from .net import QATransformer

FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


def save_checkpoint(model: QATransformer, vocab: Vocabulary, path, extras: dict | None = None) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "role": model.role,
        "config": model.config.to_dict(),
        "vocab_hash": vocab.content_hash,
        "state_dict": {k: v.cpu() for k, v in model.state_dict().items()},
        "extras": extras or {},
    }
    torch.save(payload, path)


def load_checkpoint(path, vocab: Vocabulary, expected_role: str | None = None):
    """Rebuild the model; returns (model, extras)."""
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}") from None
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    if payload["vocab_hash"] != vocab.content_hash:
        raise CheckpointError(
            f"{path}: vocabulary hash mismatch (checkpoint {payload['vocab_hash'][:12]}..., "
            f"dataset {vocab.content_hash[:12]}...)"
        )
    if expected_role is not None and payload["role"] != expected_role:
        raise CheckpointError(f"{path}: role '{payload['role']}', expected '{expected_role}'")
    config = ModelConfig.from_dict(payload["config"])
    if config.vocab_size != len(vocab):
        raise CheckpointError(f"{path}: config vocab_size {config.vocab_size} != dataset {len(vocab)}")
    table = payload["state_dict"]["embed.weight"].numpy()
    model = QATransformer(config, table, role=payload["role"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload["extras"]
