"""DOTA-format annotation and detection files, scene tiling, PGM images.

Annotation lines carry 10 whitespace-separated tokens: eight vertex
coordinates, a category name, and a 0/1 difficulty flag.  Detection files
follow the Task-1 submission layout, one file per category with lines
"image_id score x1 y1 x2 y2 x3 y3 x4 y4".  Output uses UTF-8 with LF line
endings; CRLF input is tolerated.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DegenerateQuad, ParseError
from .geometry import Point, Quad, area, canonicalize, intersection_area
from .model import FeatureMap
from .postprocess import Detection, quad_nms

CATEGORIES = (
    "plane", "baseball-diamond", "bridge", "ground-track-field",
    "small-vehicle", "large-vehicle", "ship", "tennis-court",
    "basketball-court", "storage-tank", "soccer-ball-field", "roundabout",
    "harbor", "swimming-pool", "helicopter",
)

# Column labels of the results table: short categories abbreviate, the rest
# keep their capitalized full name.
ABBREVIATIONS = {
    "plane": "Plane", "baseball-diamond": "BD", "bridge": "Bridge",
    "ground-track-field": "GTF", "small-vehicle": "SV", "large-vehicle": "LV",
    "ship": "Ship", "tennis-court": "TC", "basketball-court": "BC",
    "storage-tank": "ST", "soccer-ball-field": "SBF", "roundabout": "RA",
    "harbor": "Harbor", "swimming-pool": "SP", "helicopter": "HC",
}

DEFAULT_TILE = 1024
DEFAULT_OVERLAP = 200


@dataclass(frozen=True)
class AnnotationRecord:
    quad: Quad
    category: str
    difficult: bool = False

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")


@dataclass(frozen=True)
class TileWindow:
    """A processing window; may extend past the image into zero padding."""

    origin: Point
    width: int
    height: int


@dataclass
class ParseStats:
    skipped_lines: int = 0
    skipped_degenerate: int = 0


def parse_annotations(text: str, stats: ParseStats | None = None) -> list[AnnotationRecord]:
    """Parse DOTA annotation text into canonicalized records.

    Non-blank lines without exactly 10 tokens (e.g. the "imagesource:" and
    "gsd:" headers) are skipped and counted in ``stats.skipped_lines``;
    degenerate quads are skipped and counted in ``stats.skipped_degenerate``.
    Raises ParseError for malformed numeric, category or difficulty tokens
    on a 10-token line.
    """
    stats = stats if stats is not None else ParseStats()
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 10:
            stats.skipped_lines += 1
            continue
        try:
            coords = [float(t) for t in tokens[:8]]
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad coordinate: {exc}") from exc
        if not all(math.isfinite(c) for c in coords):
            raise ParseError(f"line {lineno}: non-finite coordinate")
        category = tokens[8]
        if category not in CATEGORIES:
            raise ParseError(f"line {lineno}: unknown category {category!r}")
        try:
            difficult = int(tokens[9]) != 0
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad difficulty flag {tokens[9]!r}") from exc
        try:
            quad = canonicalize(list(zip(coords[0::2], coords[1::2])))
        except DegenerateQuad:
            stats.skipped_degenerate += 1
            continue
        records.append(AnnotationRecord(quad, category, difficult))
    return records


def write_annotations(records: Iterable[AnnotationRecord]) -> str:
    """Render records back to annotation text; parses back to equal records."""
    lines = []
    for rec in records:
        coords = " ".join(repr(c) for c in rec.quad.flat())
        lines.append(f"{coords} {rec.category} {int(rec.difficult)}")
    return "".join(line + "\n" for line in lines)


def detection_file_name(category: str) -> str:
    return f"Task1_{category}.txt"


def write_detections(dets: Sequence[Detection], image_id: str, out_dir: str | Path,
                     append: bool = False) -> list[Path]:
    """Write one Task-1 file per category under ``out_dir``.

    Every category file is created (empty when the class has no
    detections); lines are ordered by descending score then source_index,
    scores printed with 6 decimals and coordinates with 4.  With
    ``append`` existing files gain lines instead of being replaced, for
    corpus-level accumulation across images.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_class: dict[int, list[Detection]] = {}
    for det in dets:
        if not 0 <= det.class_id < len(CATEGORIES):
            raise ValueError(f"class_id {det.class_id} out of range")
        by_class.setdefault(det.class_id, []).append(det)
    paths = []
    for class_id, category in enumerate(CATEGORIES):
        path = out_dir / detection_file_name(category)
        rows = sorted(by_class.get(class_id, ()),
                      key=lambda d: (-d.score, d.source_index))
        mode = "a" if append and path.exists() else "w"
        with open(path, mode, encoding="utf-8", newline="\n") as fh:
            for det in rows:
                coords = " ".join(f"{c:.4f}" for c in det.quad.flat())
                fh.write(f"{image_id} {det.score:.6f} {coords}\n")
        paths.append(path)
    return paths


def parse_detections(text: str, stats: ParseStats | None = None
                     ) -> list[tuple[str, float, Quad]]:
    """Parse one Task-1 per-class file into (image_id, score, quad) tuples."""
    stats = stats if stats is not None else ParseStats()
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 10:
            stats.skipped_lines += 1
            continue
        try:
            score = float(tokens[1])
            coords = [float(t) for t in tokens[2:]]
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad numeric token: {exc}") from exc
        try:
            quad = canonicalize(list(zip(coords[0::2], coords[1::2])))
        except DegenerateQuad:
            stats.skipped_degenerate += 1
            continue
        out.append((tokens[0], score, quad))
    return out


def tile_plan(img_w: int, img_h: int, tile: int = DEFAULT_TILE,
              overlap: int = DEFAULT_OVERLAP) -> list[TileWindow]:
    """Overlapping windows covering the image, row-major.

    Origins advance by (tile - overlap); the final origin per axis is
    clamped so the far edge meets the image edge.  Images smaller than a
    tile get a single window at the origin (the window may overhang into
    padding).
    """
    if tile <= 0:
        raise ConfigError("tile must be positive")
    if not 0 <= overlap < tile:
        raise ConfigError("need 0 <= overlap < tile")
    if img_w < 1 or img_h < 1:
        raise ConfigError("image dimensions must be >= 1")

    def axis_origins(extent: int) -> list[int]:
        stride = tile - overlap
        xs = []
        x = 0
        while x + tile < extent:
            xs.append(x)
            x += stride
        last = max(0, extent - tile)
        if not xs or last > xs[-1]:
            xs.append(last)
        return xs

    return [TileWindow(Point(float(ox), float(oy)), tile, tile)
            for oy in axis_origins(img_h) for ox in axis_origins(img_w)]


def crop_annotations(records: Sequence[AnnotationRecord], window: TileWindow,
                     min_inside: float = 0.7) -> list[AnnotationRecord]:
    """Window-local ground truth: keep quads mostly inside the window.

    A record survives when at least ``min_inside`` of its area lies in the
    window; its vertices are then clamped to the window box, shifted to
    window-local coordinates and re-canonicalized.  Quads that collapse
    under clamping are dropped.
    """
    x0, y0 = window.origin
    x1, y1 = x0 + window.width, y0 + window.height
    win_quad = canonicalize([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
    out = []
    for rec in records:
        full = area(rec.quad)
        if full <= 0.0:
            continue
        if intersection_area(rec.quad, win_quad) / full < min_inside:
            continue
        clamped = [(min(max(v.x, x0), x1) - x0, min(max(v.y, y0), y1) - y0)
                   for v in rec.quad.vertices]
        try:
            quad = canonicalize(clamped)
        except DegenerateQuad:
            continue
        out.append(AnnotationRecord(quad, rec.category, rec.difficult))
    return out


def merge_tiles(per_window: Sequence[Sequence[Detection]],
                windows: Sequence[TileWindow],
                nms_iou: float = 0.5) -> list[Detection]:
    """Lift window-local detections to scene coordinates and deduplicate.

    Each quad is translated by its window origin and re-canonicalized;
    detections are renumbered globally (window order, then local order)
    and per-class NMS removes duplicates from overlap zones.  Output is
    ordered by class then NMS keep order.
    """
    if len(per_window) != len(windows):
        raise ValueError("per_window and windows must align")
    merged: list[Detection] = []
    for dets, window in zip(per_window, windows):
        ox, oy = window.origin
        for det in dets:
            quad = canonicalize([(v.x + ox, v.y + oy) for v in det.quad.vertices])
            merged.append(Detection(quad, det.score, det.class_id, len(merged)))
    out = []
    for class_id in sorted({d.class_id for d in merged}):
        group = [d for d in merged if d.class_id == class_id]
        out.extend(quad_nms(group, nms_iou))
    return out


_PGM_TOKEN = re.compile(rb"(?:\s*(?:#[^\n]*\n)?)*(\S+)")


def read_pgm(path: str | Path) -> FeatureMap:
    """Read a P5 (binary) or P2 (ASCII) PGM into a 1-channel map in [0, 1]."""
    data = Path(path).read_bytes()
    pos = 0
    tokens = []
    while len(tokens) < 4:
        m = _PGM_TOKEN.match(data, pos)
        if not m:
            raise ParseError(f"{path}: truncated PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise ParseError(f"{path}: bad PGM header") from exc
    if maxval <= 0 or maxval > 255:
        raise ParseError(f"{path}: unsupported maxval {maxval}")
    if magic == b"P5":
        raster = data[pos + 1: pos + 1 + width * height]  # one whitespace byte
        if len(raster) != width * height:
            raise ParseError(f"{path}: truncated PGM raster")
        grid = np.frombuffer(raster, dtype=np.uint8).astype(np.float64)
    elif magic == b"P2":
        values = data[pos:].split()
        if len(values) < width * height:
            raise ParseError(f"{path}: truncated PGM raster")
        grid = np.array([int(v) for v in values[: width * height]], dtype=np.float64)
    else:
        raise ParseError(f"{path}: unsupported PGM magic {magic!r}")
    return FeatureMap((grid / maxval).reshape(1, height, width))


def write_pgm(path: str | Path, image: FeatureMap) -> None:
    """Write a 1-channel map (values clipped to [0, 1]) as binary PGM."""
    if image.channels != 1:
        raise ValueError("PGM output needs a single channel")
    grid = np.clip(image.data[0], 0.0, 1.0)
    raster = np.rint(grid * 255).astype(np.uint8)
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + raster.tobytes())
