"""Vocabulary and word-embedding tables.

Questions and answers share one vocabulary; the question-generation model
reuses it with inputs and outputs swapped, which only works if both sides
index into the same table.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

PAD, START, END, UNK = "<pad>", "<start>", "<end>", "<unk>"
SPECIALS = (PAD, START, END, UNK)
PAD_ID, START_ID, END_ID, UNK_ID = 0, 1, 2, 3


@dataclass
class Vocabulary:
    id_to_token: list[str]
    token_to_id: dict[str, int] = field(init=False)

    def __post_init__(self):
        if tuple(self.id_to_token[:4]) != SPECIALS:
            raise ValueError(f"first four ids must be {SPECIALS}")
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("duplicate token in vocabulary")

    def __len__(self) -> int:
        return len(self.id_to_token)

    def encode(self, tokens: list[str]) -> list[int]:
        get = self.token_to_id.get
        return [get(t, UNK_ID) for t in tokens]

    def decode(self, ids: list[int]) -> list[str]:
        return [self.id_to_token[i] for i in ids]

    @property
    def content_hash(self) -> str:
        """Stable digest used to refuse checkpoint/dataset mismatches."""
        return hashlib.sha256("\n".join(self.id_to_token).encode()).hexdigest()


def build_vocabulary(samples, min_count: int = 1) -> Vocabulary:
    """Count question and answer tokens, keep those seen >= min_count times.

    Order is frequency-descending with a lexicographic tie-break, so equal
    corpora always produce identical id assignments.
    """
    if not samples:
        raise ValueError("cannot build a vocabulary from an empty sample list")
    counts = Counter()
    for s in samples:
        counts.update(s.question)
        for ans in s.answers:
            counts.update(ans)
    kept = [t for t, c in counts.items() if c >= min_count and t not in SPECIALS]
    kept.sort(key=lambda t: (-counts[t], t))
    return Vocabulary(list(SPECIALS) + kept)


@dataclass
class EmbeddingTable:
    """Per-token word vectors; row 0 (<pad>) is all-zero."""

    vectors: np.ndarray
    dim: int = 300

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[1] != self.dim:
            raise ValueError(f"expected |V|x{self.dim} matrix, got {self.vectors.shape}")
        self.vectors[PAD_ID] = 0.0

    @classmethod
    def random(cls, vocab: Vocabulary, dim: int = 300, seed: int = 0, sigma: float = 0.1) -> "EmbeddingTable":
        """Seeded Gaussian rows; the offline stand-in for pretrained vectors."""
        rng = np.random.default_rng(seed)
        vecs = rng.normal(0.0, sigma, size=(len(vocab), dim))
        return cls(vecs, dim)

    @classmethod
    def from_text_file(cls, vocab: Vocabulary, path, dim: int = 300, seed: int = 0) -> "EmbeddingTable":
        """Load whitespace-separated "token v1 .. vdim" vectors.

        Vocabulary tokens missing from the file fall back to the <unk> row.
        """
        table = cls.random(vocab, dim, seed).vectors
        found = np.zeros(len(vocab), dtype=bool)
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                parts = line.rstrip("\n").split(" ")
                if len(parts) != dim + 1:
                    continue
                idx = vocab.token_to_id.get(parts[0])
                if idx is not None:
                    table[idx] = [float(x) for x in parts[1:]]
                    found[idx] = True
        missing = ~found
        missing[:4] = False
        table[missing] = table[UNK_ID]
        return cls(table, dim)
