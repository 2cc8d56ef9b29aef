"""Per-scene object proposals and their on-disk binary format.

Layout (little-endian): magic ``G3DP``, u32 version, u32 P, f32 aabb[6]
(min xyz, max xyz), f32 features[P x 32], f32 centers[P x 3] (raw scene
coordinates), f32 boxes[P x 6] (center xyz + extent xyz), i32 class_ids[P].

Centers are min-max normalized into the unit cube against the stored scene
AABB at load time; everything else stays in scene units.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"G3DP"
VERSION = 1
FEATURE_DIM = 32


class ProposalFormatError(Exception):
    pass


@dataclass
class ProposalSet:
    scene_id: str
    features: np.ndarray  # (P, 32)
    centers: np.ndarray   # (P, 3), normalized to [0, 1]
    boxes: np.ndarray     # (P, 6), scene units
    class_ids: np.ndarray  # (P,)
    aabb: np.ndarray      # (6,) min xyz, max xyz

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.centers = np.asarray(self.centers, dtype=np.float64)
        self.boxes = np.asarray(self.boxes, dtype=np.float64)
        self.class_ids = np.asarray(self.class_ids, dtype=np.int64)
        self.aabb = np.asarray(self.aabb, dtype=np.float64)
        p = self.features.shape[0]
        if p < 1:
            raise ProposalFormatError(f"{self.scene_id}: need at least one proposal")
        if self.features.shape != (p, FEATURE_DIM):
            raise ProposalFormatError(f"{self.scene_id}: features must be Px{FEATURE_DIM}")
        for name, arr, cols in (("centers", self.centers, 3), ("boxes", self.boxes, 6)):
            if arr.shape != (p, cols):
                raise ProposalFormatError(f"{self.scene_id}: {name} shape {arr.shape} != ({p}, {cols})")
        if self.class_ids.shape != (p,):
            raise ProposalFormatError(f"{self.scene_id}: class_ids length mismatch")
        if np.any(self.centers < -1e-9) or np.any(self.centers > 1 + 1e-9):
            raise ProposalFormatError(f"{self.scene_id}: normalized centers outside [0,1]")
        if np.any(self.boxes[:, 3:] <= 0):
            raise ProposalFormatError(f"{self.scene_id}: box extents must be positive")

    @property
    def count(self) -> int:
        return self.features.shape[0]


def _normalize(raw_centers: np.ndarray, aabb: np.ndarray) -> np.ndarray:
    lo, hi = aabb[:3], aabb[3:]
    span = np.maximum(hi - lo, 1e-12)
    return np.clip((raw_centers - lo) / span, 0.0, 1.0)


def _denormalize(centers: np.ndarray, aabb: np.ndarray) -> np.ndarray:
    lo, hi = aabb[:3], aabb[3:]
    return lo + centers * np.maximum(hi - lo, 1e-12)


def load_proposals(path, scene_id: str) -> ProposalSet:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ProposalFormatError(f"{path}: bad magic {blob[:4]!r}")
    version, p = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise ProposalFormatError(f"{path}: unsupported version {version}")
    expected = 12 + 4 * (6 + p * FEATURE_DIM + p * 3 + p * 6 + p)
    if len(blob) != expected:
        raise ProposalFormatError(f"{path}: {len(blob)} bytes but header P={p} implies {expected}")
    off = 12
    aabb = np.frombuffer(blob, "<f4", 6, off).astype(np.float64)
    off += 24
    feats = np.frombuffer(blob, "<f4", p * FEATURE_DIM, off).reshape(p, FEATURE_DIM)
    off += 4 * p * FEATURE_DIM
    centers = np.frombuffer(blob, "<f4", p * 3, off).reshape(p, 3).astype(np.float64)
    off += 4 * p * 3
    boxes = np.frombuffer(blob, "<f4", p * 6, off).reshape(p, 6)
    off += 4 * p * 6
    class_ids = np.frombuffer(blob, "<i4", p, off)
    return ProposalSet(scene_id, feats, _normalize(centers, aabb), boxes, class_ids, aabb)


def write_proposals(pset: ProposalSet, path) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, pset.count))
        fh.write(pset.aabb.astype("<f4").tobytes())
        fh.write(pset.features.astype("<f4").tobytes())
        fh.write(_denormalize(pset.centers, pset.aabb).astype("<f4").tobytes())
        fh.write(pset.boxes.astype("<f4").tobytes())
        fh.write(pset.class_ids.astype("<i4").tobytes())
