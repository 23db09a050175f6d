"""Multi-scale, multi-ratio anchor generation over feature-map grids."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .geometry import Point, Quad

DEFAULT_SCALES = (4.0, 8.0, 16.0, 32.0, 64.0)
DEFAULT_RATIOS = ((1, 1), (1, 2), (2, 1), (1, 8), (8, 1))


@dataclass(frozen=True)
class AnchorSpec:
    """Anchor shape configuration: side = base_size * scale, ratios are w:h."""

    base_size: float = 16.0
    scales: tuple[float, ...] = DEFAULT_SCALES
    ratios: tuple[tuple[float, float], ...] = DEFAULT_RATIOS

    def __post_init__(self):
        if self.base_size <= 0:
            raise ValueError("base_size must be positive")
        if not self.scales or any(s <= 0 for s in self.scales):
            raise ValueError("scales must be positive")
        if not self.ratios or any(p <= 0 or q <= 0 for p, q in self.ratios):
            raise ValueError("ratio components must be positive")


@dataclass(frozen=True)
class Anchor:
    """Axis-aligned reference rectangle placed on a feature grid."""

    center: Point
    width: float
    height: float
    level: int = 0

    def corners(self) -> tuple[Point, Point, Point, Point]:
        """Rectangle corners in canonical order (top-left first, clockwise on screen)."""
        x0 = self.center.x - 0.5 * self.width
        x1 = self.center.x + 0.5 * self.width
        y0 = self.center.y - 0.5 * self.height
        y1 = self.center.y + 0.5 * self.height
        return (Point(x0, y0), Point(x1, y0), Point(x1, y1), Point(x0, y1))

    def as_quad(self) -> Quad:
        return Quad(self.corners())


def anchor_shapes(spec: AnchorSpec) -> list[tuple[float, float]]:
    """One (width, height) per (scale, ratio) pair, scale-major order.

    A ratio w:h = p:q reshapes the square side s = base_size * scale into
    width s*sqrt(p/q) and height s*sqrt(q/p), preserving the area s**2.
    """
    shapes = []
    for scale in spec.scales:
        side = spec.base_size * scale
        for p, q in spec.ratios:
            shapes.append((side * math.sqrt(p / q), side * math.sqrt(q / p)))
    return shapes


def grid_anchors(spec: AnchorSpec, feat_h: int, feat_w: int, stride: float,
                 level: int = 0) -> list[Anchor]:
    """Place every anchor shape at each cell of a feat_h x feat_w grid.

    Centers sit at half-stride offsets ((j + 0.5) * stride, (i + 0.5) * stride);
    output is row-major over cells with the shape index varying fastest.
    """
    if feat_h < 1 or feat_w < 1:
        raise ValueError("grid dimensions must be >= 1")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    shapes = anchor_shapes(spec)
    out = []
    for i in range(feat_h):
        cy = (i + 0.5) * stride
        for j in range(feat_w):
            cx = (j + 0.5) * stride
            for w, h in shapes:
                out.append(Anchor(Point(cx, cy), w, h, level))
    return out


def pyramid_anchors(spec: AnchorSpec, grids: Sequence[tuple[int, int]],
                    strides: Sequence[float], levels: Sequence[int],
                    split_scales: bool = False) -> list[Anchor]:
    """Anchors for a whole pyramid, one grid per level.

    By default the full shape set is emitted at every level.  With
    ``split_scales`` each level uses a single scale instead: scale k goes
    to level index min(k, n_levels - 1), so a 5-scale spec over 4 levels
    puts the two coarsest scales on the last level.
    """
    if not (len(grids) == len(strides) == len(levels)):
        raise ValueError("grids, strides and levels must align")
    out = []
    for idx, ((fh, fw), stride, level) in enumerate(zip(grids, strides, levels)):
        level_spec = spec
        if split_scales:
            chosen = [s for k, s in enumerate(spec.scales)
                      if min(k, len(levels) - 1) == idx]
            if not chosen:
                continue
            level_spec = AnchorSpec(spec.base_size, tuple(chosen), spec.ratios)
        out.extend(grid_anchors(level_spec, fh, fw, stride, level))
    return out
