"""Axis-aligned 3D box operations. Boxes are (cx, cy, cz, ex, ey, ez)."""

from __future__ import annotations

import numpy as np


def box_corners(box: np.ndarray) -> np.ndarray:
    """Expand center+extent into the 8 corner points (8, 3)."""
    box = np.asarray(box, dtype=np.float64)
    c, e = box[:3], box[3:] / 2.0
    signs = np.array(
        [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
        dtype=np.float64,
    )
    return c + signs * e


def corners_to_box(corners: np.ndarray) -> np.ndarray:
    corners = np.asarray(corners, dtype=np.float64)
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    return np.concatenate([(lo + hi) / 2.0, hi - lo])


def box_iou(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    """Pairwise IoU matrix of shape (len(a), len(b))."""
    a = np.atleast_2d(np.asarray(boxes_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(boxes_b, dtype=np.float64))
    a_lo, a_hi = a[:, None, :3] - a[:, None, 3:] / 2, a[:, None, :3] + a[:, None, 3:] / 2
    b_lo, b_hi = b[None, :, :3] - b[None, :, 3:] / 2, b[None, :, :3] + b[None, :, 3:] / 2
    inter = np.prod(np.clip(np.minimum(a_hi, b_hi) - np.maximum(a_lo, b_lo), 0.0, None), axis=-1)
    vol_a = np.prod(a[:, 3:], axis=-1)[:, None]
    vol_b = np.prod(b[:, 3:], axis=-1)[None, :]
    union = vol_a + vol_b - inter
    return np.where(union > 0, inter / np.maximum(union, 1e-300), 0.0)
