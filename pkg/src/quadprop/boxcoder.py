"""Four-point regression coding between anchors and ground-truth quads.

A target is eight normalized offsets (dx1, dy1, ..., dx4, dy4): each
ground-truth vertex minus the matching anchor corner, divided by the
anchor width (x) or height (y).  Vertices pair with corners by canonical
index, so both sides must be in canonical order before coding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .anchors import Anchor
from .geometry import Quad, aabb, canonicalize, iou

# (dx1, dy1, dx2, dy2, dx3, dy3, dx4, dy4)
Delta8 = tuple[float, ...]

POSITIVE = "positive"
NEGATIVE = "negative"
IGNORE = "ignore"

DEFAULT_POS_IOU = 0.7
DEFAULT_NEG_IOU = 0.3


@dataclass(frozen=True)
class AnchorLabel:
    state: str
    matched_gt: Optional[int] = None
    target: Optional[Delta8] = None

    def __post_init__(self):
        if self.state == POSITIVE:
            if self.matched_gt is None or self.target is None:
                raise ValueError("positive labels need matched_gt and target")
        elif self.matched_gt is not None or self.target is not None:
            raise ValueError(f"{self.state} labels carry no match")


def encode(anchor: Anchor, gt: Quad) -> Delta8:
    """Offsets that regress the anchor rectangle onto ``gt``."""
    deltas = []
    for corner, vertex in zip(anchor.corners(), gt.vertices):
        deltas.append((vertex.x - corner.x) / anchor.width)
        deltas.append((vertex.y - corner.y) / anchor.height)
    return tuple(deltas)


def decode(anchor: Anchor, deltas: Sequence[float]) -> Quad:
    """Apply offsets to the anchor corners; exact inverse of :func:`encode`."""
    if len(deltas) != 8:
        raise ValueError(f"expected 8 deltas, got {len(deltas)}")
    points = []
    for k, corner in enumerate(anchor.corners()):
        points.append((corner.x + deltas[2 * k] * anchor.width,
                       corner.y + deltas[2 * k + 1] * anchor.height))
    return canonicalize(points)


def _boxes_overlap(a, b) -> bool:
    return not (a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1])


def assign_targets(anchors: Sequence[Anchor], gts: Sequence[Quad],
                   pos_iou: float = DEFAULT_POS_IOU,
                   neg_iou: float = DEFAULT_NEG_IOU) -> list[AnchorLabel]:
    """Label each anchor positive/negative/ignore against the ground truth.

    An anchor is positive when its best polygon IoU reaches ``pos_iou``,
    or when it is the best anchor for some ground truth (so every gt gets
    at least one positive); negative below ``neg_iou``; ignore between.
    Positives carry the regression target toward their best-IoU gt, ties
    resolved toward the lowest index.
    """
    if not 0.0 <= neg_iou <= pos_iou <= 1.0:
        raise ValueError("need 0 <= neg_iou <= pos_iou <= 1")
    if not gts:
        return [AnchorLabel(NEGATIVE) for _ in anchors]

    gt_boxes = [aabb(g) for g in gts]
    best_iou = [0.0] * len(anchors)
    best_gt = [0] * len(anchors)
    gt_best_anchor = [0] * len(gts)
    gt_best_iou = [-1.0] * len(gts)
    for i, anchor in enumerate(anchors):
        quad = anchor.as_quad()
        box = aabb(quad)
        for j, gt in enumerate(gts):
            v = iou(quad, gt) if _boxes_overlap(box, gt_boxes[j]) else 0.0
            if v > best_iou[i]:
                best_iou[i] = v
                best_gt[i] = j
            if v > gt_best_iou[j]:
                gt_best_iou[j] = v
                gt_best_anchor[j] = i

    forced = set(gt_best_anchor)
    labels = []
    for i, anchor in enumerate(anchors):
        if best_iou[i] >= pos_iou or i in forced:
            j = best_gt[i]
            labels.append(AnchorLabel(POSITIVE, j, encode(anchor, gts[j])))
        elif best_iou[i] < neg_iou:
            labels.append(AnchorLabel(NEGATIVE))
        else:
            labels.append(AnchorLabel(IGNORE))
    return labels


def sample_minibatch(labels: Sequence[AnchorLabel], size: int = 256,
                     pos_fraction: float = 0.5, seed: int = 0) -> list[int]:
    """Seeded index sample: at most size*pos_fraction positives, rest negatives.

    Returns sorted indices; deterministic for a given seed, fewer than
    ``size`` when there are not enough candidates.
    """
    if not 0.0 < pos_fraction < 1.0:
        raise ValueError("pos_fraction must be in (0, 1)")
    if size < 1:
        raise ValueError("size must be >= 1")
    pos = [i for i, lab in enumerate(labels) if lab.state == POSITIVE]
    neg = [i for i, lab in enumerate(labels) if lab.state == NEGATIVE]
    rng = np.random.Generator(np.random.PCG64(seed))
    n_pos = min(len(pos), int(size * pos_fraction))
    n_neg = min(len(neg), size - n_pos)
    chosen = []
    if n_pos:
        chosen.extend(rng.choice(len(pos), n_pos, replace=False).tolist())
        chosen = [pos[k] for k in chosen]
    if n_neg:
        chosen.extend(neg[k] for k in rng.choice(len(neg), n_neg, replace=False).tolist())
    return sorted(chosen)
