"""Question-answer dataset records and JSON I/O.

File layout mirrors the public ScanQA release: a JSON list of
``{scene_id, question_id, question, answers, object_ids, object_names}``
objects. Questions and answers are stored as plain strings and tokenized at
load time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from ..tokenizer import tokenize
from .vocab import UNK


class CorpusError(Exception):
    """Raised for missing or malformed dataset files."""


@dataclass
class QASample:
    scene_id: str
    question_id: str
    question: list[str]
    answers: list[list[str]]
    target_object_ids: list[int] = field(default_factory=list)
    gt_boxes: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not self.question:
            raise CorpusError(f"{self.question_id}: empty question")
        if not self.answers or any(not a for a in self.answers):
            raise CorpusError(f"{self.question_id}: every sample needs at least one non-empty answer")


_REQUIRED = ("scene_id", "question_id", "question", "answers")


def _parse_record(rec: dict, index: int) -> QASample:
    if not isinstance(rec, dict):
        raise CorpusError(f"record {index}: expected an object, got {type(rec).__name__}")
    for key in _REQUIRED:
        if key not in rec:
            raise CorpusError(f"record {index}: missing field '{key}'")
    try:
        return QASample(
            scene_id=str(rec["scene_id"]),
            question_id=str(rec["question_id"]),
            question=tokenize(rec["question"]),
            answers=[tokenize(a) for a in rec["answers"]],
            target_object_ids=[int(i) for i in rec.get("object_ids") or []],
        )
    except (TypeError, ValueError, AttributeError, CorpusError) as exc:
        raise CorpusError(f"record {index}: {exc}") from exc


def expand_train_samples(samples: list[QASample]) -> list[QASample]:
    """Split every multi-answer sample into one sample per answer.

    The answer multiset is preserved; derived ids get an ``_<k>`` suffix.
    """
    out = []
    for s in samples:
        for k, ans in enumerate(s.answers):
            out.append(replace(s, question_id=f"{s.question_id}_{k}", answers=[ans]))
    return out


def load_dataset(path, split: str) -> list[QASample]:
    """Read one split; ``split='train'`` applies multi-answer expansion."""
    if split not in ("train", "val", "test"):
        raise ValueError(f"unknown split '{split}'")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise CorpusError(f"dataset file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, list):
        raise CorpusError(f"{path}: top-level value must be a list")
    samples = [_parse_record(rec, i) for i, rec in enumerate(raw)]
    if split == "train":
        samples = expand_train_samples(samples)
    return samples


def write_dataset(samples: list[QASample], path) -> None:
    records = [
        {
            "scene_id": s.scene_id,
            "question_id": s.question_id,
            "question": " ".join(s.question),
            "answers": [" ".join(a) for a in s.answers],
            "object_ids": list(s.target_object_ids),
            "object_names": [],
        }
        for s in samples
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(records, fh, indent=1, sort_keys=True)


def augment_question(question: list[str], rng: np.random.Generator) -> list[str]:
    """Replace one uniformly chosen word with <unk> (train-time noise)."""
    out = list(question)
    out[int(rng.integers(len(out)))] = UNK
    return out
