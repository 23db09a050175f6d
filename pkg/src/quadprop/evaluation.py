"""Detection-vs-ground-truth matching, average precision, and mean AP.

Matching follows the VOC single-assignment protocol with polygon IoU:
detections greedily claim their best unmatched non-difficult ground
truth, detections landing on a difficult ground truth are excluded from
scoring, and everything else is a false positive.  AP integrates the
precision envelope over recall; the 11-point variant is available for
compatibility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .dota_io import CATEGORIES, AnnotationRecord
from .errors import ConfigError
from .geometry import aabb, iou
from .postprocess import Detection

DEFAULT_MATCH_IOU = 0.5

TP = "tp"
FP = "fp"


@dataclass(frozen=True)
class PRPoint:
    recall: float
    precision: float
    score: float


@dataclass(frozen=True)
class ClassAP:
    category: str
    ap: float
    n_gt: int
    n_det: int


def _boxes_overlap(a, b) -> bool:
    return not (a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1])


def match_detections(dets: Sequence[Detection], gts: Sequence[AnnotationRecord],
                     iou_thr: float = DEFAULT_MATCH_IOU
                     ) -> tuple[list[Optional[str]], dict[int, int]]:
    """Flag each detection of one class on one image as TP, FP, or discarded.

    Returns flags aligned with the input order ('tp', 'fp', or None for
    detections neutralized by a difficult ground truth) plus a map from
    detection index to the matched ground-truth index.  Detections are
    processed by descending score (ties: lower source_index); each ground
    truth can be claimed once.
    """
    flags: list[Optional[str]] = [FP] * len(dets)
    matched: dict[int, int] = {}
    claimed = [False] * len(gts)
    gt_boxes = [aabb(rec.quad) for rec in gts]
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, dets[i].source_index))
    for i in order:
        det = dets[i]
        box = aabb(det.quad)
        overlaps = [iou(det.quad, rec.quad)
                    if _boxes_overlap(box, gt_boxes[j]) else 0.0
                    for j, rec in enumerate(gts)]
        best_free = -1
        best_free_iou = -1.0
        for j, rec in enumerate(gts):
            if rec.difficult or claimed[j]:
                continue
            if overlaps[j] > best_free_iou:
                best_free_iou = overlaps[j]
                best_free = j
        if best_free >= 0 and best_free_iou >= iou_thr:
            flags[i] = TP
            matched[i] = best_free
            claimed[best_free] = True
            continue
        best_all = max(range(len(gts)), key=lambda j: overlaps[j], default=-1)
        if best_all >= 0 and gts[best_all].difficult and overlaps[best_all] >= iou_thr:
            flags[i] = None
    return flags, matched


def pr_curve(flags: Sequence[bool], scores: Sequence[float], n_gt: int) -> list[PRPoint]:
    """Precision/recall after each detection, score-descending input."""
    points = []
    tp = fp = 0
    for flag, score in zip(flags, scores):
        if flag:
            tp += 1
        else:
            fp += 1
        recall = tp / n_gt if n_gt else 0.0
        points.append(PRPoint(recall, tp / (tp + fp), score))
    return points


def average_precision(flags: Sequence[bool], n_gt: int,
                      method: str = "continuous") -> float:
    """AP from TP/FP flags in score-descending order.

    ``continuous`` integrates the monotone precision envelope over recall
    (computed on integer TP counts so an all-TP run is exactly 1.0);
    ``eleven_point`` averages the best precision at recalls 0, 0.1, ..., 1.
    Zero ground truths define AP = 0.
    """
    if n_gt < 0:
        raise ValueError("n_gt must be >= 0")
    if n_gt == 0:
        return 0.0
    tp_cum = []
    prec = []
    tp = fp = 0
    for flag in flags:
        if flag:
            tp += 1
        else:
            fp += 1
        tp_cum.append(tp)
        prec.append(tp / (tp + fp))

    if method == "continuous":
        mtp = [0] + tp_cum + [tp_cum[-1] if tp_cum else 0]
        mpre = [0.0] + prec + [0.0]
        for i in range(len(mpre) - 2, -1, -1):
            mpre[i] = max(mpre[i], mpre[i + 1])
        total = 0.0
        for i in range(len(mtp) - 1):
            if mtp[i + 1] != mtp[i]:
                total += (mtp[i + 1] - mtp[i]) * mpre[i + 1]
        return total / n_gt
    if method == "eleven_point":
        rec = [t / n_gt for t in tp_cum]
        acc = 0.0
        for k in range(11):
            t = k / 10
            best = max((p for r, p in zip(rec, prec) if r >= t), default=0.0)
            acc += best
        return acc / 11.0
    raise ValueError(f"unknown AP method {method!r}")


def mean_ap(per_class: Sequence[ClassAP],
            classes: Sequence[str] | None = None) -> float:
    """Unweighted arithmetic mean of class APs over a configured class list.

    ``classes`` defaults to the full 15-category taxonomy; a configured
    class missing from ``per_class`` raises ConfigError.
    """
    wanted = tuple(classes) if classes is not None else CATEGORIES
    if not wanted:
        raise ConfigError("empty class list")
    by_name = {c.category: c for c in per_class}
    missing = [name for name in wanted if name not in by_name]
    if missing:
        raise ConfigError(f"missing AP for classes: {', '.join(missing)}")
    return math.fsum(by_name[name].ap for name in wanted) / len(wanted)


def evaluate(gts_by_image: Mapping[str, Sequence[AnnotationRecord]],
             dets_by_image: Mapping[str, Sequence[Detection]],
             classes: Sequence[str] | None = None,
             iou_thr: float = DEFAULT_MATCH_IOU,
             method: str = "continuous") -> list[ClassAP]:
    """Corpus-level per-class AP.

    Detections carry class indices into CATEGORIES.  Flags from all images
    of a class are merged by descending score (ties: image id, then
    source_index) before the AP fold.  ``classes`` defaults to every
    category with at least one ground truth, in taxonomy order.
    """
    if classes is None:
        present = {rec.category for recs in gts_by_image.values() for rec in recs}
        classes = [c for c in CATEGORIES if c in present]
    results = []
    for category in classes:
        class_id = CATEGORIES.index(category)
        scored: list[tuple[float, str, int, bool]] = []
        n_gt = 0
        n_det = 0
        for image_id in sorted(set(gts_by_image) | set(dets_by_image)):
            gts = [r for r in gts_by_image.get(image_id, ()) if r.category == category]
            dets = [d for d in dets_by_image.get(image_id, ()) if d.class_id == class_id]
            n_gt += sum(1 for r in gts if not r.difficult)
            flags, _ = match_detections(dets, gts, iou_thr)
            for det, flag in zip(dets, flags):
                if flag is not None:
                    scored.append((det.score, image_id, det.source_index, flag == TP))
        scored.sort(key=lambda item: (-item[0], item[1], item[2]))
        n_det = len(scored)
        ap = average_precision([item[3] for item in scored], n_gt, method)
        results.append(ClassAP(category, ap, n_gt, n_det))
    return results
