"""Synthetic desk-scale scenes and QA pairs.

Scenes are rooms of axis-aligned boxes with a class and a color. Proposal
features use a fixed deterministic encoding so the QA task is learnable from
the proposals alone:

  dims 0..11   one-hot object class (palette index)
  dims 12..19  one-hot color
  dims 20..22  box extents / room_size
  dim  23      cbrt(volume) / room_size
  dims 24..31  zero (reserved)

Optional Gaussian feature noise emulates an imperfect detector backbone.

Three question templates, answers derivable from scene geometry:

  color    "what color is the <class>"        (class must be unique in scene)
  count    "how many <class> are there"
  closest  "what is closest to the <class>"   (unique anchor, >= 2 objects)

Every template has a short answer ("red") and a sentence answer
("the chair is red"); which one is primary is a config switch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import QASample
from .proposals import FEATURE_DIM, ProposalSet

CLASS_SLOTS = 12
COLOR_SLOTS = 8

DEFAULT_CLASSES = ("chair", "table", "lamp", "sofa", "shelf", "bed")
DEFAULT_COLORS = ("red", "green", "blue", "yellow", "white", "black")


class ConfigError(Exception):
    pass


@dataclass
class GeneratorConfig:
    scenes: int = 8
    objects_min: int = 3
    objects_max: int = 8
    classes: tuple[str, ...] = DEFAULT_CLASSES
    colors: tuple[str, ...] = DEFAULT_COLORS
    room_size: float = 10.0
    questions_per_scene: int = 2
    sentence_answers: bool = True
    answer_variants: int = 1
    feature_noise: float = 0.0
    scene_prefix: str = "synth"

    def validate(self):
        if self.scenes < 1:
            raise ConfigError("need at least one scene")
        if self.objects_min < 1 or self.objects_max < self.objects_min:
            raise ConfigError("objects per scene must satisfy 1 <= min <= max")
        if len(self.classes) > CLASS_SLOTS or len(self.colors) > COLOR_SLOTS:
            raise ConfigError(f"palettes capped at {CLASS_SLOTS} classes / {COLOR_SLOTS} colors")
        if any(" " in c for c in self.classes) or any(" " in c for c in self.colors):
            raise ConfigError("palette entries must be single tokens")
        if self.answer_variants not in (1, 2):
            raise ConfigError("answer_variants must be 1 or 2")


@dataclass
class SceneObject:
    class_name: str
    color: str
    center: np.ndarray
    extents: np.ndarray


def _encode_features(objects: list[SceneObject], cfg: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    feats = np.zeros((len(objects), FEATURE_DIM))
    for i, obj in enumerate(objects):
        feats[i, cfg.classes.index(obj.class_name)] = 1.0
        feats[i, CLASS_SLOTS + cfg.colors.index(obj.color)] = 1.0
        feats[i, 20:23] = obj.extents / cfg.room_size
        feats[i, 23] = np.prod(obj.extents) ** (1.0 / 3.0) / cfg.room_size
    if cfg.feature_noise > 0:
        feats += rng.normal(0.0, cfg.feature_noise, feats.shape)
    return feats


def decode_objects(pset: ProposalSet, cfg: GeneratorConfig) -> list[SceneObject]:
    """Reconstruct scene objects from a proposal set (inverse of encoding)."""
    objects = []
    for i in range(pset.count):
        color_idx = int(np.argmax(pset.features[i, CLASS_SLOTS:CLASS_SLOTS + COLOR_SLOTS]))
        objects.append(
            SceneObject(
                class_name=cfg.classes[int(pset.class_ids[i])],
                color=cfg.colors[color_idx],
                center=pset.boxes[i, :3].copy(),
                extents=pset.boxes[i, 3:].copy(),
            )
        )
    return objects


def _answer_forms(qtype: str, payload: dict) -> tuple[list[str], list[str]]:
    """(short, sentence) token lists for one question."""
    if qtype == "color":
        return [payload["color"]], ["the", payload["cls"], "is", payload["color"]]
    if qtype == "count":
        n = str(payload["count"])
        return [n], ["there", "are", n, "of", "them"]
    if qtype == "closest":
        return [payload["other"]], ["the", payload["other"], "is", "the", "closest", "object"]
    raise ValueError(qtype)


def _question_tokens(qtype: str, cls: str) -> list[str]:
    if qtype == "color":
        return ["what", "color", "is", "the", cls]
    if qtype == "count":
        return ["how", "many", cls, "are", "there"]
    if qtype == "closest":
        return ["what", "is", "closest", "to", "the", cls]
    raise ValueError(qtype)


def _candidate_questions(objects: list[SceneObject]) -> list[tuple[str, str]]:
    """All well-posed (qtype, class) pairs for a scene, in a fixed order."""
    by_class: dict[str, list[int]] = {}
    for i, obj in enumerate(objects):
        by_class.setdefault(obj.class_name, []).append(i)
    pool = []
    for cls in sorted(by_class):
        idxs = by_class[cls]
        if len(idxs) == 1:
            pool.append(("color", cls))
            if len(objects) >= 2:
                pool.append(("closest", cls))
        pool.append(("count", cls))
    return pool


def _resolve(qtype: str, cls: str, objects: list[SceneObject]) -> tuple[dict, list[int]]:
    """Ground a question against the scene: answer payload + target ids."""
    idxs = [i for i, o in enumerate(objects) if o.class_name == cls]
    if qtype == "color":
        if len(idxs) != 1:
            raise ValueError(f"color question needs a unique '{cls}'")
        return {"cls": cls, "color": objects[idxs[0]].color}, idxs
    if qtype == "count":
        if not idxs:
            raise ValueError(f"no '{cls}' in scene")
        return {"cls": cls, "count": len(idxs)}, idxs
    if qtype == "closest":
        if len(idxs) != 1 or len(objects) < 2:
            raise ValueError(f"closest question needs a unique '{cls}' and another object")
        anchor = objects[idxs[0]]
        dists = [
            (float(np.linalg.norm(o.center - anchor.center)), j)
            for j, o in enumerate(objects)
            if j != idxs[0]
        ]
        _, nearest = min(dists)
        return {"cls": cls, "other": objects[nearest].class_name}, idxs
    raise ValueError(qtype)


def derive_answers(objects: list[SceneObject], question: list[str]) -> tuple[list[list[str]], list[int]]:
    """Re-derive the acceptable answers for a generated question.

    Independent consistency check: parses the question template and grounds
    it against scene geometry, returning both answer forms and the ids of
    the referenced objects.
    """
    if question[:4] == ["what", "color", "is", "the"]:
        qtype, cls = "color", question[4]
    elif question[:2] == ["how", "many"]:
        qtype, cls = "count", question[2]
    elif question[:5] == ["what", "is", "closest", "to"]:
        qtype, cls = "closest", question[5]
    else:
        raise ValueError(f"unrecognized question template: {question}")
    payload, targets = _resolve(qtype, cls, objects)
    short, sentence = _answer_forms(qtype, payload)
    return [short, sentence], targets


def generate_synthetic_dataset(
    cfg: GeneratorConfig, seed: int
) -> tuple[list[ProposalSet], list[QASample]]:
    """Deterministic scenes + QA pairs for the given seed."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    proposals, samples = [], []
    for s in range(cfg.scenes):
        scene_id = f"{cfg.scene_prefix}{s:04d}"
        n = int(rng.integers(cfg.objects_min, cfg.objects_max + 1))
        objects = []
        for _ in range(n):
            extents = rng.uniform(0.5, 1.5, 3)
            center = rng.uniform(extents / 2, cfg.room_size - extents / 2)
            objects.append(
                SceneObject(
                    class_name=cfg.classes[int(rng.integers(len(cfg.classes)))],
                    color=cfg.colors[int(rng.integers(len(cfg.colors)))],
                    center=center,
                    extents=extents,
                )
            )
        aabb = np.array([0.0, 0.0, 0.0, cfg.room_size, cfg.room_size, cfg.room_size])
        pset = ProposalSet(
            scene_id=scene_id,
            features=_encode_features(objects, cfg, rng),
            centers=np.stack([o.center for o in objects]) / cfg.room_size,
            boxes=np.stack([np.concatenate([o.center, o.extents]) for o in objects]),
            class_ids=np.array([cfg.classes.index(o.class_name) for o in objects]),
            aabb=aabb,
        )
        proposals.append(pset)

        pool = _candidate_questions(objects)
        take = min(cfg.questions_per_scene, len(pool))
        picks = rng.choice(len(pool), size=take, replace=False)
        for q_idx, pick in enumerate(sorted(int(p) for p in picks)):
            qtype, cls = pool[pick]
            payload, targets = _resolve(qtype, cls, objects)
            short, sentence = _answer_forms(qtype, payload)
            primary, alternate = (sentence, short) if cfg.sentence_answers else (short, sentence)
            answers = [primary] if cfg.answer_variants == 1 else [primary, alternate]
            samples.append(
                QASample(
                    scene_id=scene_id,
                    question_id=f"{scene_id}-q{q_idx}",
                    question=_question_tokens(qtype, cls),
                    answers=answers,
                    target_object_ids=targets,
                    gt_boxes=[pset.boxes[i].copy() for i in targets],
                )
            )
    return proposals, samples
