"""Model hyperparameters and the parameter-count bookkeeping formula."""

from __future__ import annotations

from dataclasses import asdict, dataclass

FEATURE_DIM = 32


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 300
    encoder_layers: int = 2
    decoder_layers: int = 2
    heads: int = 6
    ffn_dim: int = 1200
    dropout: float = 0.1
    max_answer_len: int = 20
    max_question_len: int = 40
    p_max: int = 128
    feature_dim: int = FEATURE_DIM
    multi_object_bce: bool = False
    use_localization: bool = True
    target_embeddings: bool = False

    def __post_init__(self):
        if self.d_model % self.heads != 0:
            raise ValueError(f"heads ({self.heads}) must divide d_model ({self.d_model})")
        if self.d_model % 2 != 0:
            raise ValueError("d_model must be even for sinusoidal positions")
        if self.target_embeddings and not self.use_localization:
            raise ValueError("target embeddings need the localization head to pick the target")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)

    def parameter_count(self) -> int:
        """Trainable parameter count (frozen word embeddings excluded).

        Encoder layer: packed qkv projection 3d^2+3d, output projection
        d^2+d, feed-forward 2*d*f+f+d, two layer norms 4d. Decoder layer
        adds a second attention block and a third norm. Plus the proposal
        projection, vocabulary head, localization MLP, and the optional
        pair of target-marker vectors.
        """
        d, f, v = self.d_model, self.ffn_dim, self.vocab_size
        attn = 3 * d * d + 3 * d + d * d + d
        ffn = 2 * d * f + f + d
        enc_layer = attn + ffn + 4 * d
        dec_layer = 2 * attn + ffn + 6 * d
        total = self.encoder_layers * enc_layer + self.decoder_layers * dec_layer
        total += self.feature_dim * d + d      # proposal projection
        total += d * v + v                     # vocabulary head
        if self.use_localization:
            total += d * d + d + d + 1         # two-layer MLP to a scalar
        if self.target_embeddings:
            total += 2 * d
        return total
