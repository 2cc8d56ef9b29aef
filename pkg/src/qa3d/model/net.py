"""Transformer encoder-decoder over object proposals and text tokens.

Proposals are projected from their 32-d detector features to the word
embedding width, with normalized scene centers added onto the last three
dimensions as the spatial signal (no index-based position, so the encoder
is permutation-equivariant over proposals). Question tokens get frozen word
embeddings plus sinusoidal positions. Both sequences are concatenated and
encoded jointly; the decoder cross-attends to the full encoded sequence.

The same network runs the inverse task (question generation from an
answer) by swapping which text sequence is input and which is generated;
see ``swap_for_vqg``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..data.vocab import PAD_ID
from .config import ModelConfig


@dataclass
class EncodedScene:
    """Encoder output plus the padding bookkeeping for downstream heads."""

    seq: torch.Tensor        # (B, P+W, d)
    prop_pad: torch.Tensor   # (B, P) bool, True = padding
    text_pad: torch.Tensor   # (B, W) bool

    @property
    def p(self) -> int:
        return self.prop_pad.shape[1]

    @property
    def pad(self) -> torch.Tensor:
        return torch.cat([self.prop_pad, self.text_pad], dim=1)

    @property
    def proposal_slice(self) -> torch.Tensor:
        return self.seq[:, : self.p]

    def select(self, rows) -> "EncodedScene":
        idx = torch.as_tensor(rows, dtype=torch.long, device=self.seq.device)
        return EncodedScene(self.seq[idx], self.prop_pad[idx], self.text_pad[idx])


def sinusoidal_positions(length: int, dim: int, dtype=torch.float32) -> torch.Tensor:
    """Standard sin/cos position table: even dims sine, odd dims cosine."""
    pos = torch.arange(length, dtype=torch.float64).unsqueeze(1)
    freq = torch.exp(torch.arange(0, dim, 2, dtype=torch.float64) * (-math.log(10000.0) / dim))
    table = torch.zeros(length, dim, dtype=torch.float64)
    table[:, 0::2] = torch.sin(pos * freq)
    table[:, 1::2] = torch.cos(pos * freq)
    return table.to(dtype)


class QATransformer(nn.Module):
    """Answer generator ("vqa" role) or question generator ("vqg" role)."""

    def __init__(self, config: ModelConfig, embeddings: np.ndarray, role: str = "vqa", seed: int = 0):
        super().__init__()
        if role not in ("vqa", "vqg"):
            raise ValueError(f"unknown role '{role}'")
        if embeddings.shape != (config.vocab_size, config.d_model):
            raise ValueError(
                f"embedding table {embeddings.shape} does not match "
                f"(vocab_size={config.vocab_size}, d_model={config.d_model})"
            )
        self.config = config
        self.role = role
        d = config.d_model

        self.embed = nn.Embedding.from_pretrained(
            torch.as_tensor(embeddings, dtype=torch.get_default_dtype()),
            freeze=True,
            padding_idx=PAD_ID,
        )
        self.proj = nn.Linear(config.feature_dim, d)
        self.encoder = nn.TransformerEncoder(
            nn.TransformerEncoderLayer(
                d, config.heads, config.ffn_dim, config.dropout, batch_first=True
            ),
            config.encoder_layers,
            enable_nested_tensor=False,
        )
        self.decoder = nn.TransformerDecoder(
            nn.TransformerDecoderLayer(
                d, config.heads, config.ffn_dim, config.dropout, batch_first=True
            ),
            config.decoder_layers,
        )
        self.out_head = nn.Linear(d, config.vocab_size)
        if config.use_localization:
            self.loc_hidden = nn.Linear(d, d)
            self.loc_out = nn.Linear(d, 1)
        if config.target_embeddings:
            self.target_embed = nn.Parameter(torch.zeros(2, d))

        max_pos = max(config.max_question_len, config.max_answer_len) + 2
        self.register_buffer("pos_table", sinusoidal_positions(max_pos, d), persistent=False)
        self._reset_parameters(seed)

    # input/output caps depend on which direction the model runs
    @property
    def max_input_len(self) -> int:
        return self.config.max_question_len if self.role == "vqa" else self.config.max_answer_len

    @property
    def max_output_len(self) -> int:
        return self.config.max_answer_len if self.role == "vqa" else self.config.max_question_len

    def _reset_parameters(self, seed: int):
        """Fan-based uniform init for projection weights, zero biases.

        Runs under a private generator so construction is reproducible
        regardless of global RNG state. Layer norms keep their identity
        defaults; the target markers start at zero.
        """
        gen = torch.Generator().manual_seed(seed)

        def xavier(weight):
            fan_out, fan_in = weight.shape[0], weight.shape[-1]
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            with torch.no_grad():
                weight.uniform_(-bound, bound, generator=gen)

        for module in self.modules():
            if isinstance(module, nn.Linear):
                xavier(module.weight)
                if module.bias is not None:
                    with torch.no_grad():
                        module.bias.zero_()
            elif isinstance(module, nn.MultiheadAttention):
                xavier(module.in_proj_weight)
                with torch.no_grad():
                    module.in_proj_bias.zero_()

    def project_proposals(self, features: torch.Tensor, centers: torch.Tensor) -> torch.Tensor:
        """(.., P, 32) features + (.., P, 3) centers -> (.., P, d)."""
        out = self.proj(features)
        return out + F.pad(centers, (self.config.d_model - 3, 0))

    def embed_tokens(self, ids: torch.Tensor) -> torch.Tensor:
        """Frozen word vectors scaled by sqrt(d), plus sinusoidal positions."""
        x = self.embed(ids) * math.sqrt(self.config.d_model)
        return x + self.pos_table[: ids.shape[1]].to(x.dtype)

    def encode(
        self,
        features: torch.Tensor,
        centers: torch.Tensor,
        prop_pad: torch.Tensor,
        token_ids: torch.Tensor,
        text_pad: torch.Tensor,
    ) -> EncodedScene:
        props = self.project_proposals(features, centers)
        toks = self.embed_tokens(token_ids)
        seq = torch.cat([props, toks], dim=1)
        pad = torch.cat([prop_pad, text_pad], dim=1)
        out = self.encoder(seq, src_key_padding_mask=pad)
        return EncodedScene(out, prop_pad, text_pad)

    def localize(self, encoded: EncodedScene) -> torch.Tensor:
        """Per-proposal confidence scores; padded slots are -inf."""
        if not self.config.use_localization:
            raise RuntimeError("localization head disabled in this configuration")
        x = F.relu(self.loc_hidden(encoded.proposal_slice))
        conf = self.loc_out(x).squeeze(-1)
        return conf.masked_fill(encoded.prop_pad, float("-inf"))

    def apply_target_embeddings(self, encoded: EncodedScene, target_idx: torch.Tensor) -> EncodedScene:
        """Mark the predicted target proposal for the decoder.

        Adds one learned vector to the argmax proposal row and another to
        every other proposal row. Question rows are untouched, as is the
        localization input (which runs on the unmarked encoding).
        """
        one_hot = F.one_hot(target_idx, num_classes=encoded.p).to(encoded.seq.dtype).unsqueeze(-1)
        marks = self.target_embed[0] + one_hot * (self.target_embed[1] - self.target_embed[0])
        seq = torch.cat([encoded.proposal_slice + marks, encoded.seq[:, encoded.p :]], dim=1)
        return EncodedScene(seq, encoded.prop_pad, encoded.text_pad)

    def prepare_memory(self, encoded: EncodedScene) -> EncodedScene:
        """The sequence the decoder actually consumes (target marks, if on)."""
        if not self.config.target_embeddings:
            return encoded
        target_idx = self.localize(encoded).argmax(dim=1)
        return self.apply_target_embeddings(encoded, target_idx)

    def decode_logits(self, memory: EncodedScene, prefix_ids: torch.Tensor) -> torch.Tensor:
        """Vocabulary logits at every prefix position (causal)."""
        t = prefix_ids.shape[1]
        if t > self.max_output_len + 1:
            raise ValueError(f"prefix length {t} exceeds cap {self.max_output_len + 1}")
        tgt = self.embed_tokens(prefix_ids)
        causal = torch.triu(torch.ones(t, t, dtype=torch.bool, device=tgt.device), diagonal=1)
        out = self.decoder(tgt, memory.seq, tgt_mask=causal, memory_key_padding_mask=memory.pad)
        return self.out_head(out)


def swap_for_vqg(model: QATransformer, seed: int = 0) -> QATransformer:
    """Fresh same-architecture model for the inverse task.

    Encoder consumes [proposals; answer tokens], decoder emits question
    tokens. Parameters are independent of the source model's; the
    localization branch stays with the answer model only.
    """
    from dataclasses import replace

    role = "vqg" if model.role == "vqa" else "vqa"
    config = replace(model.config, use_localization=False, target_embeddings=False)
    table = model.embed.weight.detach().cpu().numpy()
    twin = QATransformer(config, table, role=role, seed=seed)
    return twin.to(dtype=model.embed.weight.dtype)
