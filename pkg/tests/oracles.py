"""Independent reference implementations used to check the library.

Everything here deliberately avoids the library's own computation paths:
IoU comes from rasterized coverage counting or shapely (GEOS), NMS from a
direct quadratic sweep, matching from an exhaustive re-derivation of the
single-assignment protocol.
"""

import math

import numpy as np
from shapely.geometry import Polygon

from quadprop.geometry import Quad, canonicalize


def raster_iou(qa: Quad, qb: Quad, resolution: int = 1024) -> float:
    """IoU by counting pixel centers on a grid over the joint bounding box."""
    xs = [v.x for v in qa.vertices] + [v.x for v in qb.vertices]
    ys = [v.y for v in qa.vertices] + [v.y for v in qb.vertices]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    extent = max(x1 - x0, y1 - y0)
    if extent <= 0:
        return 1.0
    cell = extent / resolution
    nx = max(1, int(math.ceil((x1 - x0) / cell)))
    ny = max(1, int(math.ceil((y1 - y0) / cell)))
    gx = x0 + (np.arange(nx) + 0.5) * cell
    gy = (y0 + (np.arange(ny) + 0.5) * cell)[:, None]

    def inside(quad):
        mask = np.ones((ny, nx), dtype=bool)
        verts = quad.vertices
        for i in range(4):
            px, py = verts[i]
            qx, qy = verts[(i + 1) % 4]
            if px == qx and py == qy:
                continue
            mask &= (qx - px) * (gy - py) - (qy - py) * (gx - px) >= 0.0
        return mask

    in_a = inside(qa)
    in_b = inside(qb)
    union = np.count_nonzero(in_a | in_b)
    if union == 0:
        return 0.0
    return np.count_nonzero(in_a & in_b) / union


def shapely_iou(qa: Quad, qb: Quad) -> float:
    pa = Polygon([(v.x, v.y) for v in qa.vertices])
    pb = Polygon([(v.x, v.y) for v in qb.vertices])
    union = pa.union(pb).area
    if union <= 0:
        return 0.0
    return pa.intersection(pb).area / union


def random_convex_quad(rng: np.random.Generator, lo: float = 0.0, hi: float = 100.0,
                       r_min: float = 4.0, r_max: float = 18.0,
                       center=None) -> Quad:
    """Convex quad from four sorted polar angles around a random center."""
    while True:
        angles = np.sort(rng.uniform(0.0, 2 * math.pi, 4))
        # well-separated angles keep the quad fat enough to be non-degenerate
        gaps = np.diff(np.concatenate([angles, [angles[0] + 2 * math.pi]]))
        if np.min(gaps) > 0.35:
            break
    radii = rng.uniform(r_min, r_max, 4)
    if center is None:
        cx = rng.uniform(lo + r_max, hi - r_max)
        cy = rng.uniform(lo + r_max, hi - r_max)
    else:
        cx, cy = center
    pts = [(cx + r * math.cos(a), cy + r * math.sin(a))
           for a, r in zip(angles, radii)]
    return canonicalize(pts)


def brute_force_nms(dets, iou_threshold):
    """Quadratic greedy NMS with shapely IoU; mirrors the published contract."""
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, dets[i].source_index))
    kept = []
    for i in order:
        if all(shapely_iou(dets[i].quad, dets[k].quad) <= iou_threshold for k in kept):
            kept.append(i)
    return [dets[i] for i in kept]


def reference_match(dets, gts, iou_matrix, iou_thr):
    """Exhaustive single-assignment matcher over a precomputed IoU matrix.

    Returns flags aligned to the detections ('tp', 'fp', or None for
    difficult-neutralized) following the same protocol as the library:
    score-descending sweep, best unmatched non-difficult gt first, then
    the difficult-overlap discard rule.
    """
    flags = ["fp"] * len(dets)
    taken = set()
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, dets[i].source_index))
    for i in order:
        candidates = [(iou_matrix[i][j], -j) for j in range(len(gts))
                      if j not in taken and not gts[j].difficult]
        if candidates:
            best_iou, neg_j = max(candidates)
            if best_iou >= iou_thr:
                flags[i] = "tp"
                taken.add(-neg_j)
                continue
        if gts:
            best_all = max(range(len(gts)), key=lambda j: iou_matrix[i][j])
            if gts[best_all].difficult and iou_matrix[i][best_all] >= iou_thr:
                flags[i] = None
    return flags


def central_difference(fn, x, h=1e-5):
    """Central finite-difference gradient of a scalar function of a vector."""
    x = [float(v) for v in x]
    grad = []
    for k in range(len(x)):
        hi = list(x)
        lo = list(x)
        hi[k] += h
        lo[k] -= h
        grad.append((fn(hi) - fn(lo)) / (2 * h))
    return grad


def rect_quad(x0, y0, x1, y1) -> Quad:
    return canonicalize([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
