"""Tensor assembly for training and evaluation batches."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..data.dataset import QASample, augment_question
from ..data.proposals import ProposalSet
from ..data.vocab import END_ID, PAD_ID, START_ID, Vocabulary


@dataclass
class Batch:
    qids: list[str]
    features: torch.Tensor      # (B, P, 32)
    centers: torch.Tensor       # (B, P, 3)
    prop_pad: torch.Tensor      # (B, P) bool
    prop_boxes: np.ndarray      # (B, P, 6)
    prop_counts: np.ndarray     # (B,)
    input_ids: torch.Tensor     # (B, W)
    text_pad: torch.Tensor      # (B, W) bool
    target_in: torch.Tensor     # (B, T) decoder input, starts with <start>
    target_out: torch.Tensor    # (B, T) shifted targets, ends with <end>
    question_ids: list[list[int]]        # clean (unaugmented) questions
    answer_refs: list[list[list[int]]]   # all reference answers, id space
    gt_boxes: list[list[np.ndarray]]

    @property
    def size(self) -> int:
        return len(self.qids)


def _pad_ids(rows: list[list[int]], width: int) -> np.ndarray:
    out = np.full((len(rows), width), PAD_ID, dtype=np.int64)
    for i, row in enumerate(rows):
        out[i, : len(row)] = row
    return out


def collate(
    samples: list[QASample],
    proposals: dict[str, ProposalSet],
    vocab: Vocabulary,
    role: str = "vqa",
    dtype: torch.dtype = torch.float32,
    rng: np.random.Generator | None = None,
    augment: bool = False,
    max_question_len: int = 40,
    max_answer_len: int = 20,
) -> Batch:
    """Pad one list of samples into model tensors.

    ``role='vqa'`` encodes the question and teacher-forces the first answer;
    ``role='vqg'`` encodes the first answer and teacher-forces the question.
    Augmentation (one word replaced by <unk>) only ever touches question
    tokens used as encoder input.
    """
    b = len(samples)
    psets = [proposals[s.scene_id] for s in samples]
    p_max = max(ps.count for ps in psets)
    features = np.zeros((b, p_max, psets[0].features.shape[1]))
    centers = np.zeros((b, p_max, 3))
    boxes = np.zeros((b, p_max, 6))
    prop_pad = np.ones((b, p_max), dtype=bool)
    counts = np.zeros(b, dtype=np.int64)
    for i, ps in enumerate(psets):
        counts[i] = ps.count
        features[i, : ps.count] = ps.features
        centers[i, : ps.count] = ps.centers
        boxes[i, : ps.count] = ps.boxes
        prop_pad[i, : ps.count] = False

    questions_clean = [vocab.encode(s.question[:max_question_len]) for s in samples]
    answers = [vocab.encode(s.answers[0][:max_answer_len]) for s in samples]
    if role == "vqa":
        inputs = list(questions_clean)
        if augment:
            if rng is None:
                raise ValueError("augmentation needs an rng")
            inputs = [vocab.encode(augment_question(s.question, rng)[:max_question_len]) for s in samples]
        targets = answers
    elif role == "vqg":
        inputs = answers
        targets = questions_clean
    else:
        raise ValueError(f"unknown role '{role}'")

    t_max = max(len(t) for t in targets) + 1
    target_in = _pad_ids([[START_ID] + t for t in targets], t_max)
    target_out = _pad_ids([t + [END_ID] for t in targets], t_max)
    input_arr = _pad_ids(inputs, max(1, max(len(x) for x in inputs)))

    return Batch(
        qids=[s.question_id for s in samples],
        features=torch.as_tensor(features, dtype=dtype),
        centers=torch.as_tensor(centers, dtype=dtype),
        prop_pad=torch.as_tensor(prop_pad),
        prop_boxes=boxes,
        prop_counts=counts,
        input_ids=torch.as_tensor(input_arr),
        text_pad=torch.as_tensor(input_arr == PAD_ID),
        target_in=torch.as_tensor(target_in),
        target_out=torch.as_tensor(target_out),
        question_ids=questions_clean,
        answer_refs=[[vocab.encode(a) for a in s.answers] for s in samples],
        gt_boxes=[list(s.gt_boxes) for s in samples],
    )


def sequences_to_teacher(results, width: int | None = None):
    """Decoder input/target arrays for a list of DecodeResults.

    Target rows are the emitted tokens plus <end> when the sequence ended;
    untargeted positions are <pad>.
    """
    targets = [list(r.tokens) + ([END_ID] if r.ended else []) for r in results]
    width = width or max(1, max(len(t) for t in targets))
    prefix = _pad_ids([([START_ID] + list(r.tokens))[:width] for r in results], width)
    target = _pad_ids([t[:width] for t in targets], width)
    return torch.as_tensor(prefix), torch.as_tensor(target)
