"""Quadrilateral non-maximum suppression and detection filtering."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .geometry import Quad, aabb, iou

DEFAULT_NMS_IOU = 0.5


@dataclass(frozen=True)
class Detection:
    """Scored, class-labeled quad; ``quad`` is expected in canonical order
    and ``source_index`` is a stable id used for deterministic tie-breaks."""

    quad: Quad
    score: float
    class_id: int = 0
    source_index: int = 0

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")


def quad_nms(dets: Sequence[Detection], iou_threshold: float = DEFAULT_NMS_IOU,
             fast_reject: bool = True) -> list[Detection]:
    """Greedy suppression of detections overlapping a kept one above the threshold.

    Detections are visited by descending score (ties: lower source_index
    first); suppression uses strict IoU > threshold, so a threshold of 1
    removes only exact duplicates.  The axis-aligned fast-reject skips
    polygon clipping for disjoint boxes and is decision-identical to the
    plain path.  Caller groups by class.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError("iou_threshold must be in [0, 1]")
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, dets[i].source_index))
    boxes = [aabb(dets[i].quad) for i in order]
    kept: list[int] = []
    alive = [True] * len(order)
    for pos, i in enumerate(order):
        if not alive[pos]:
            continue
        kept.append(i)
        ax0, ay0, ax1, ay1 = boxes[pos]
        for later in range(pos + 1, len(order)):
            if not alive[later]:
                continue
            if fast_reject:
                bx0, by0, bx1, by1 = boxes[later]
                if ax1 < bx0 or bx1 < ax0 or ay1 < by0 or by1 < ay0:
                    continue
            if iou(dets[i].quad, dets[order[later]].quad) > iou_threshold:
                alive[later] = False
    return [dets[i] for i in kept]


def filter_detections(dets: Sequence[Detection], score_threshold: float = 0.0,
                      top_k: int | None = None) -> list[Detection]:
    """Drop scores below the threshold and keep at most top_k by score.

    Ties at the top_k boundary resolve toward earlier input positions;
    survivors come back in their original input order.
    """
    idx = [i for i, d in enumerate(dets) if d.score >= score_threshold]
    if top_k is not None and top_k < len(idx):
        if top_k <= 0:
            return []
        ranked = sorted(idx, key=lambda i: (-dets[i].score, i))
        idx = sorted(ranked[:top_k])
    return [dets[i] for i in idx]
