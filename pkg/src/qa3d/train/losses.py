"""Stage-2 losses: word-level cross entropy and object localization."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from ..data.vocab import PAD_ID
from ..geometry import box_iou

IOU_POSITIVE = 0.25


def xe_loss(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Negative log-likelihood summed over non-pad positions, batch mean."""
    if logits.shape[:2] != targets.shape:
        raise ValueError(f"logits {tuple(logits.shape[:2])} misaligned with targets {tuple(targets.shape)}")
    flat = F.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), targets.reshape(-1),
        ignore_index=PAD_ID, reduction="sum",
    )
    return flat / logits.shape[0]


def next_token_accuracy(logits: torch.Tensor, targets: torch.Tensor) -> float:
    mask = targets != PAD_ID
    hits = (logits.argmax(dim=-1) == targets) & mask
    return float(hits.sum().item()) / max(1, int(mask.sum().item()))


def localization_targets(prop_boxes: np.ndarray, gt_boxes: np.ndarray):
    """Per-proposal supervision from ground-truth boxes.

    Returns the single-target label (best IoU against any GT box, lowest
    index on ties), the multi-target mask (IoU >= 0.25 with some GT box),
    and whether the label fell back to index 0 because nothing overlapped.
    """
    iou = box_iou(prop_boxes, gt_boxes).max(axis=1)
    label = int(np.argmax(iou))
    return label, iou >= IOU_POSITIVE, bool(iou.max() <= 0.0)


def localization_loss(
    confidence: torch.Tensor,
    prop_boxes: np.ndarray,
    prop_counts: np.ndarray,
    gt_boxes: list,
    mode: str = "ce",
):
    """CE against the best-overlap proposal, or BCE over all overlaps.

    ``confidence`` is (B, P) with -inf at padded slots. Samples without any
    ground-truth box are skipped (they carry no localization signal).
    Returns (loss, info) where info reports the labels used and how many
    samples hit the zero-overlap fallback.
    """
    if mode not in ("ce", "bce"):
        raise ValueError(f"unknown localization mode '{mode}'")
    device, dtype = confidence.device, confidence.dtype
    rows, labels, fallbacks = [], [], 0
    multi = torch.zeros_like(confidence)
    for b in range(confidence.shape[0]):
        if len(gt_boxes[b]) == 0:
            continue
        p = int(prop_counts[b])
        label, positive, fellback = localization_targets(prop_boxes[b][:p], np.asarray(gt_boxes[b]))
        rows.append(b)
        labels.append(label)
        fallbacks += int(fellback)
        multi[b, :p] = torch.as_tensor(positive, dtype=dtype, device=device)
    if not rows:
        zero = confidence.sum() * 0.0
        return zero, {"rows": [], "labels": [], "fallbacks": 0}
    idx = torch.as_tensor(rows, dtype=torch.long, device=device)
    if mode == "ce":
        target = torch.as_tensor(labels, dtype=torch.long, device=device)
        loss = F.cross_entropy(confidence[idx], target)
    else:
        per_sample = []
        for b in rows:
            p = int(prop_counts[b])
            per_sample.append(
                F.binary_cross_entropy_with_logits(confidence[b, :p], multi[b, :p], reduction="mean")
            )
        loss = torch.stack(per_sample).mean()
    return loss, {"rows": rows, "labels": labels, "fallbacks": fallbacks}
