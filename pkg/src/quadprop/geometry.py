"""Planar geometry for quadrilaterals: canonical ordering, area, polygon IoU.

Coordinates follow the image convention: x grows right, y grows down.
The canonical vertex order is clockwise on screen, which under y-down is
exactly a non-negative signed shoelace area, starting at the vertex with
the smallest y (ties broken by smallest x).

All values are double precision; no epsilon is applied to orientation
tests, so collinearity means an exact zero cross product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .errors import DegenerateQuad


class Point(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Quad:
    """Four vertices in canonical order. Build via :func:`canonicalize`.

    ``collapsed`` marks quads whose convex hull had only three corners
    (one input point was strictly interior, or two coincided); such quads
    carry a duplicated final vertex and behave as their hull triangle.
    """

    vertices: tuple[Point, Point, Point, Point]
    collapsed: bool = field(default=False, compare=False)

    def flat(self) -> tuple[float, ...]:
        """(x1, y1, x2, y2, x3, y3, x4, y4) in canonical order."""
        return tuple(c for v in self.vertices for c in v)

    def translated(self, dx: float, dy: float) -> "Quad":
        return Quad(tuple(Point(v.x + dx, v.y + dy) for v in self.vertices),
                    self.collapsed)

    @classmethod
    def from_flat(cls, coords: Sequence[float]) -> "Quad":
        if len(coords) != 8:
            raise ValueError(f"expected 8 coordinates, got {len(coords)}")
        return canonicalize(list(zip(coords[0::2], coords[1::2])))


def _as_xy(vertices) -> list[tuple[float, float]]:
    pts = []
    for v in vertices:
        x, y = float(v[0]), float(v[1])
        if not (math.isfinite(x) and math.isfinite(y)):
            raise DegenerateQuad(f"non-finite vertex ({x}, {y})")
        pts.append((x, y))
    return pts


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _hull(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Strict convex hull (collinear boundary points dropped), positive shoelace."""
    pts = sorted(set(points))
    if len(pts) < 3:
        return pts
    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _rotate_to_start(ring: list[tuple[float, float]]) -> list[tuple[float, float]]:
    start = min(range(len(ring)), key=lambda i: (ring[i][1], ring[i][0]))
    return ring[start:] + ring[:start]


def _on_segment(a, b, p) -> bool:
    if _cross(a, b, p) != 0.0:
        return False
    return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


def canonicalize(vertices: Iterable) -> Quad:
    """Order 4 points canonically, re-ordering via their convex hull.

    Accepts Points or (x, y) pairs in any order.  A point strictly inside
    the hull of the other three (or an exactly coincident pair) collapses
    the quad to its hull triangle, padded with a duplicated last vertex
    and flagged ``collapsed``; this keeps mis-digitized annotations usable
    instead of dropping them.  Raises DegenerateQuad when fewer than three
    distinct points remain or all points are collinear.  Idempotent.
    """
    pts = _as_xy(vertices)
    if len(pts) != 4:
        raise ValueError(f"expected 4 vertices, got {len(pts)}")
    unique = list(dict.fromkeys(pts))
    if len(unique) < 3:
        raise DegenerateQuad("fewer than 3 distinct vertices")
    hull = _hull(unique)
    if len(hull) < 3:
        raise DegenerateQuad("all vertices collinear")

    collapsed = False
    if len(hull) == 4:
        ring = hull
    elif len(unique) == 4:
        # one point off the strict hull: either on an edge (keep it) or interior
        (extra,) = [p for p in unique if p not in hull]
        ring = None
        for i, a in enumerate(hull):
            b = hull[(i + 1) % 3]
            if _on_segment(a, b, extra):
                ring = hull[: i + 1] + [extra] + hull[i + 1:]
                break
        if ring is None:
            ring = hull
            collapsed = True
    else:
        ring = hull
        collapsed = True

    ring = _rotate_to_start(ring)
    if len(ring) == 3:
        ring = ring + [ring[-1]]
    return Quad(tuple(Point(x, y) for x, y in ring), collapsed)


def _shoelace(poly) -> float:
    total = 0.0
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return 0.5 * total


def area(q: Quad) -> float:
    """Shoelace area; canonical quads make this non-negative."""
    return abs(_shoelace(q.vertices))


def aabb(q: Quad) -> tuple[float, float, float, float]:
    """Tight axis-aligned bounds (xmin, ymin, xmax, ymax)."""
    xs = [v.x for v in q.vertices]
    ys = [v.y for v in q.vertices]
    return min(xs), min(ys), max(xs), max(ys)


def _clip_poly(subject: list, clip: Sequence) -> list:
    """Sutherland-Hodgman: clip ``subject`` by each edge of convex ``clip``."""
    output = subject
    n = len(clip)
    for i in range(n):
        cx1, cy1 = clip[i]
        cx2, cy2 = clip[(i + 1) % n]
        if cx1 == cx2 and cy1 == cy2:
            continue  # duplicated vertex of a collapsed quad
        ex, ey = cx2 - cx1, cy2 - cy1
        inp = output
        output = []
        if not inp:
            break
        sx, sy = inp[-1]
        side_s = ex * (sy - cy1) - ey * (sx - cx1)
        for px, py in inp:
            side_p = ex * (py - cy1) - ey * (px - cx1)
            if side_p >= 0.0:
                if side_s < 0.0:
                    t = side_s / (side_s - side_p)
                    output.append((sx + t * (px - sx), sy + t * (py - sy)))
                output.append((px, py))
            elif side_s >= 0.0:
                t = side_s / (side_s - side_p)
                output.append((sx + t * (px - sx), sy + t * (py - sy)))
            sx, sy, side_s = px, py, side_p
    return output


def intersection_area(a: Quad, b: Quad) -> float:
    """Area of a ∩ b for canonical (convex) quads; 0 when disjoint."""
    clipped = _clip_poly(list(a.vertices), b.vertices)
    if len(clipped) < 3:
        return 0.0
    return abs(_shoelace(clipped))


def iou(a: Quad, b: Quad) -> float:
    """Polygon intersection over union in [0, 1]; 0 when the union is empty."""
    inter = intersection_area(a, b)
    union = area(a) + area(b) - inter
    if union <= 0.0:
        return 0.0
    v = inter / union
    return 0.0 if v < 0.0 else (1.0 if v > 1.0 else v)
