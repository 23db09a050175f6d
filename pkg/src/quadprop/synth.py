"""Deterministic synthetic aerial scenes and a perfect-proposal scorer.

Scenes are rotated bright rectangles on a dim noisy background, placed by
rejection sampling so ground truths stay nearly disjoint (pairwise IoU
below 0.05).  The oracle scorer replaces the learned network: it rates
every anchor by its true best overlap and emits the exact regression
target (optionally perturbed), which lets the whole non-learned pipeline
be verified end to end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .anchors import Anchor
from .boxcoder import decode, encode
from .dota_io import CATEGORIES, AnnotationRecord
from .errors import DegenerateQuad, PlacementError
from .geometry import Quad, aabb, canonicalize, iou
from .model import FeatureMap
from .postprocess import Detection

MAX_PAIRWISE_IOU = 0.05
BACKGROUND_LEVEL = 0.2
FILL_RANGE = (0.8, 1.0)


@dataclass(frozen=True)
class Scene:
    image: FeatureMap
    gts: tuple[AnnotationRecord, ...]
    seed: int


def _rotated_rect(cx, cy, w, h, angle_deg) -> Quad:
    a = math.radians(angle_deg)
    ca, sa = math.cos(a), math.sin(a)
    pts = []
    for ux, uy in ((-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)):
        dx, dy = ux * w, uy * h
        pts.append((cx + dx * ca - dy * sa, cy + dx * sa + dy * ca))
    return canonicalize(pts)


def _paint(grid: np.ndarray, quad: Quad, value: float) -> None:
    h, w = grid.shape
    x0, y0, x1, y1 = aabb(quad)
    c0, c1 = max(0, int(math.floor(x0))), min(w, int(math.ceil(x1)))
    r0, r1 = max(0, int(math.floor(y0))), min(h, int(math.ceil(y1)))
    if c0 >= c1 or r0 >= r1:
        return
    xs = np.arange(c0, c1) + 0.5
    ys = (np.arange(r0, r1) + 0.5)[:, None]
    inside = np.ones((r1 - r0, c1 - c0), dtype=bool)
    verts = quad.vertices
    for i in range(4):
        px, py = verts[i]
        qx, qy = verts[(i + 1) % 4]
        if px == qx and py == qy:
            continue
        inside &= (qx - px) * (ys - py) - (qy - py) * (xs - px) >= 0.0
    region = grid[r0:r1, c0:c1]
    region[inside] = value


def generate_scene(seed: int, width: int = 256, height: int = 256,
                   n_objects: int = 10,
                   size_range: tuple[float, float] = (16.0, 48.0),
                   angle_range: tuple[float, float] = (0.0, 180.0)) -> Scene:
    """Seeded scene with nearly disjoint rotated rectangles.

    Categories cycle through the taxonomy starting at ``seed % 15`` so a
    batch of consecutive seeds covers every class.  Raises PlacementError
    when rejection sampling cannot keep pairwise IoU below 0.05 within
    10 * n_objects * 100 attempts.
    """
    if n_objects < 0:
        raise ValueError("n_objects must be >= 0")
    lo, hi = size_range
    if not 0 < lo <= hi:
        raise ValueError("invalid size_range")
    if math.hypot(hi, hi) > min(width, height):
        raise ValueError("size_range too large for the image")
    rng = np.random.Generator(np.random.PCG64(seed))
    grid = rng.uniform(0.0, BACKGROUND_LEVEL, size=(height, width))

    quads: list[Quad] = []
    records = []
    budget = 10 * n_objects * 100
    attempts = 0
    for i in range(n_objects):
        while True:
            attempts += 1
            if attempts > budget:
                raise PlacementError(
                    f"placed {len(quads)}/{n_objects} objects in {budget} attempts")
            w = rng.uniform(lo, hi)
            h = rng.uniform(lo, hi)
            angle = rng.uniform(angle_range[0], angle_range[1])
            margin = 0.5 * math.hypot(w, h)
            cx = rng.uniform(margin, width - margin)
            cy = rng.uniform(margin, height - margin)
            quad = _rotated_rect(cx, cy, w, h, angle)
            if all(iou(quad, q) < MAX_PAIRWISE_IOU for q in quads):
                break
        fill = rng.uniform(*FILL_RANGE)
        _paint(grid, quad, fill)
        quads.append(quad)
        records.append(AnnotationRecord(quad, CATEGORIES[(seed + i) % len(CATEGORIES)]))
    return Scene(FeatureMap(grid[None, :, :]), tuple(records), seed)


def oracle_score(anchors: Sequence[Anchor], gts: Sequence[AnnotationRecord],
                 noise: float = 0.0, seed: int = 0) -> list[Detection]:
    """Score every anchor by its best true overlap and emit exact proposals.

    Each anchor overlapping some ground truth yields one detection: score
    is the best polygon IoU, the quad is the anchor decoded with the exact
    regression target toward that ground truth (argmax, ties to the lowest
    index), and the class comes from the same ground truth.  ``noise``
    adds seeded uniform perturbation in [-noise, +noise] to each delta
    component, degrading the proposals controllably.  Zero-overlap anchors
    emit nothing.
    """
    if not anchors:
        raise ValueError("need at least one anchor")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    rng = np.random.Generator(np.random.PCG64(seed))
    gt_boxes = [aabb(rec.quad) for rec in gts]
    out = []
    for idx, anchor in enumerate(anchors):
        quad = anchor.as_quad()
        box = aabb(quad)
        best = 0.0
        best_j = -1
        for j, rec in enumerate(gts):
            b = gt_boxes[j]
            if box[2] < b[0] or b[2] < box[0] or box[3] < b[1] or b[3] < box[1]:
                continue
            v = iou(quad, rec.quad)
            if v > best:
                best = v
                best_j = j
        if best_j < 0:
            continue
        deltas = encode(anchor, gts[best_j].quad)
        if noise > 0.0:
            jitter = rng.uniform(-noise, noise, size=8)
            deltas = tuple(d + e for d, e in zip(deltas, jitter))
        try:
            decoded = decode(anchor, deltas)
        except DegenerateQuad:
            continue
        out.append(Detection(decoded, best, CATEGORIES.index(gts[best_j].category), idx))
    return out
