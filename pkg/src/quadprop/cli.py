"""Command-line interface exposing the full pipeline.

Subcommands: iou, anchors, nms, tile, merge, eval, synth, detect.  Every
command accepts ``--config FILE`` (flat ``key = value`` lines) with
explicit flags taking precedence.  Numeric output is printed with six
decimals so golden-file comparisons stay stable.  Exit codes: 0 success,
1 input error, 2 configuration error.  QUADPROP_THREADS caps internal
parallelism (default 1).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import dota_io, evaluation, synth
from .anchors import Anchor, AnchorSpec, anchor_shapes, grid_anchors
from .boxcoder import decode
from .config import _parse_floats, _parse_ratios, load_config
from .errors import (ConfigError, DegenerateQuad, ParseError, PlacementError,
                     QuadpropError, ShapeError)
from .geometry import Point, Quad, iou
from .model import DEFAULT_PYRAMID, backbone_forward, fpn_fuse, rpn_head
from .postprocess import Detection, quad_nms

DETECTION_HEADER = "class_id,score,x1,y1,x2,y2,x3,y3,x4,y4"


def _max_workers() -> int:
    try:
        return max(1, int(os.environ.get("QUADPROP_THREADS", "1")))
    except ValueError:
        return 1


def _parse_quad(text: str) -> Quad:
    try:
        coords = [float(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise ParseError(f"bad coordinate list {text!r}: {exc}") from exc
    if len(coords) != 8:
        raise ParseError(f"expected 8 comma-separated coordinates, got {len(coords)}")
    return Quad.from_flat(coords)


def _read_detections_csv(text: str) -> list[Detection]:
    dets = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("class_id"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 10:
            raise ParseError(f"line {lineno}: expected 10 CSV fields, got {len(parts)}")
        try:
            class_id = int(parts[0])
            score = float(parts[1])
            coords = [float(p) for p in parts[2:]]
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad field: {exc}") from exc
        dets.append(Detection(Quad.from_flat(coords), score, class_id, len(dets)))
    return dets


def _format_detection(det: Detection) -> str:
    coords = ",".join(f"{c:.6f}" for c in det.quad.flat())
    return f"{det.class_id},{det.score:.6f},{coords}"


def _write_lines(path: str | None, lines: list[str]) -> None:
    text = "".join(line + "\n" for line in lines)
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="\n")


def cmd_iou(args) -> int:
    load_config(args.config, {})  # validate only; iou takes no tunables
    a = _parse_quad(args.a)
    b = _parse_quad(args.b)
    print(f"{iou(a, b):.6f}")
    return 0


def cmd_anchors(args) -> int:
    cfg = load_config(args.config, {
        "base_size": args.base, "scales": args.scales, "ratios": args.ratios,
    })
    try:
        h_txt, w_txt = args.grid.lower().split("x")
        feat_h, feat_w = int(h_txt), int(w_txt)
    except ValueError as exc:
        raise ConfigError(f"bad --grid {args.grid!r}, expected HxW") from exc
    if feat_h < 1 or feat_w < 1 or args.stride < 1:
        raise ConfigError("grid dimensions and stride must be >= 1")
    spec = AnchorSpec(cfg.base_size, cfg.scales, cfg.ratios)
    lines = ["center_x,center_y,width,height,level"]
    for a in grid_anchors(spec, feat_h, feat_w, args.stride, args.level):
        lines.append(f"{a.center.x:.6f},{a.center.y:.6f},"
                     f"{a.width:.6f},{a.height:.6f},{a.level}")
    _write_lines(args.out, lines)
    return 0


def cmd_nms(args) -> int:
    cfg = load_config(args.config, {"nms_iou": args.iou})
    text = sys.stdin.read() if args.input in (None, "-") else Path(args.input).read_text()
    dets = _read_detections_csv(text)
    kept: list[Detection] = []
    for class_id in sorted({d.class_id for d in dets}):
        kept.extend(quad_nms([d for d in dets if d.class_id == class_id], cfg.nms_iou))
    kept.sort(key=lambda d: (-d.score, d.source_index))
    _write_lines(args.out, [DETECTION_HEADER] + [_format_detection(d) for d in kept])
    return 0


def cmd_tile(args) -> int:
    cfg = load_config(args.config, {"tile": args.tile, "overlap": args.overlap})
    windows = dota_io.tile_plan(args.width, args.height, cfg.tile, cfg.overlap)
    lines = ["origin_x,origin_y,width,height"]
    lines += [f"{int(w.origin.x)},{int(w.origin.y)},{w.width},{w.height}"
              for w in windows]
    _write_lines(args.out, lines)
    return 0


def _read_windows_csv(text: str) -> list[dota_io.TileWindow]:
    windows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("origin_x"):
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError(f"line {lineno}: expected 4 CSV fields")
        try:
            ox, oy, w, h = (float(parts[0]), float(parts[1]),
                            int(parts[2]), int(parts[3]))
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad field: {exc}") from exc
        windows.append(dota_io.TileWindow(Point(ox, oy), w, h))
    return windows


def cmd_merge(args) -> int:
    cfg = load_config(args.config, {"nms_iou": args.iou})
    windows = _read_windows_csv(Path(args.windows).read_text(encoding="utf-8"))
    per_window = []
    for idx in range(len(windows)):
        path = Path(args.dets_dir) / f"tile_{idx:03d}.csv"
        per_window.append(_read_detections_csv(path.read_text(encoding="utf-8"))
                          if path.exists() else [])
    merged = dota_io.merge_tiles(per_window, windows, cfg.nms_iou)
    _write_lines(args.out, [DETECTION_HEADER] + [_format_detection(d) for d in merged])
    return 0


def _ap_table_lines(per_class: list[evaluation.ClassAP], mean: float) -> list[str]:
    lines = []
    for entry in per_class:
        label = dota_io.ABBREVIATIONS[entry.category]
        lines.append(f"{label:>8s} {entry.ap:.6f}  (gt={entry.n_gt}, det={entry.n_det})")
    lines.append(f"{'All':>8s} {mean:.6f}")
    return lines


def cmd_eval(args) -> int:
    cfg = load_config(args.config, {"match_iou": args.iou, "ap_method": args.method})
    if args.ap_values is not None:
        values = _parse_floats(args.ap_values)
        if len(values) != len(dota_io.CATEGORIES):
            raise ConfigError(
                f"--ap-values needs {len(dota_io.CATEGORIES)} values, got {len(values)}")
        per_class = [evaluation.ClassAP(cat, v, 0, 0)
                     for cat, v in zip(dota_io.CATEGORIES, values)]
    else:
        if not args.gt or not args.dets:
            raise ConfigError("eval needs either --ap-values or both --gt and --dets")
        gts_by_image = {}
        for path in sorted(Path(args.gt).glob("*.txt")):
            gts_by_image[path.stem] = dota_io.parse_annotations(
                path.read_text(encoding="utf-8"))
        dets_by_image: dict[str, list[Detection]] = {}
        for class_id, category in enumerate(dota_io.CATEGORIES):
            path = Path(args.dets) / dota_io.detection_file_name(category)
            if not path.exists():
                continue
            for image_id, score, quad in dota_io.parse_detections(
                    path.read_text(encoding="utf-8")):
                bucket = dets_by_image.setdefault(image_id, [])
                bucket.append(Detection(quad, score, class_id, len(bucket)))
        classes = list(dota_io.CATEGORIES)
        workers = _max_workers()
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                chunks = pool.map(
                    lambda c: evaluation.evaluate(gts_by_image, dets_by_image, [c],
                                                  cfg.match_iou, cfg.ap_method),
                    classes)
                per_class = [entry for chunk in chunks for entry in chunk]
        else:
            per_class = evaluation.evaluate(gts_by_image, dets_by_image, classes,
                                            cfg.match_iou, cfg.ap_method)
    mean = evaluation.mean_ap(per_class, [c.category for c in per_class])
    _write_lines(None, _ap_table_lines(per_class, mean))
    if args.out_csv:
        rows = ["category,ap,n_gt,n_det"]
        rows += [f"{e.category},{e.ap:.6f},{e.n_gt},{e.n_det}" for e in per_class]
        rows.append(f"All,{mean:.6f},,")
        _write_lines(args.out_csv, rows)
    if args.out_json:
        payload = {
            "classes": [{"category": e.category, "ap": round(e.ap, 6),
                         "n_gt": e.n_gt, "n_det": e.n_det} for e in per_class],
            "mean_ap": round(mean, 6),
        }
        Path(args.out_json).write_text(json.dumps(payload, indent=2) + "\n",
                                       encoding="utf-8")
    return 0


def cmd_synth(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed})
    if args.size_min <= 0 or args.size_max < args.size_min:
        raise ConfigError("need 0 < size-min <= size-max")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    scene = synth.generate_scene(cfg.seed, args.width, args.height, args.n,
                                 (args.size_min, args.size_max),
                                 (args.angle_min, args.angle_max))
    pgm_path = out_dir / f"scene_{cfg.seed:05d}.pgm"
    txt_path = out_dir / f"scene_{cfg.seed:05d}.txt"
    dota_io.write_pgm(pgm_path, scene.image)
    txt_path.write_text(dota_io.write_annotations(scene.gts),
                        encoding="utf-8", newline="\n")
    print(pgm_path)
    print(txt_path)
    return 0


def cmd_detect(args) -> int:
    cfg = load_config(args.config, {
        "seed": args.seed, "score_thr": args.score_thr, "top_k": args.top_k,
        "nms_iou": args.nms_iou, "lateral_channels": args.lateral_channels,
        "base_size": args.base, "scales": args.scales, "ratios": args.ratios,
    })
    image = dota_io.read_pgm(args.image)
    spec = AnchorSpec(cfg.base_size, cfg.scales, cfg.ratios)
    shapes = anchor_shapes(spec)
    taps = backbone_forward(image, cfg.seed)
    pyramid = fpn_fuse(taps, cfg.lateral_channels, cfg.seed, cfg.upsample)

    # Rank candidates by score before decoding; only the survivors of the
    # score threshold + top_k cut are decoded, which matches filtering the
    # decoded set (the filter never looks at the quad).
    candidates = []  # (score, global_index, level_pos, i, j, k)
    global_base = 0
    level_maps = []
    for level_pos, p_map in enumerate(pyramid):
        objness, deltas = rpn_head(p_map, len(shapes), cfg.seed)
        level_maps.append((objness, deltas))
        k_n, h, w = objness.data.shape
        flat = np.transpose(objness.data, (1, 2, 0)).reshape(-1)  # (i, j, k) order
        hits = np.nonzero(flat >= cfg.score_thr)[0]
        for pos in hits:
            i, rem = divmod(int(pos), w * k_n)
            j, k = divmod(rem, k_n)
            candidates.append((float(flat[pos]), global_base + int(pos),
                               level_pos, i, j, k))
        global_base += flat.size
    candidates.sort(key=lambda c: (-c[0], c[1]))
    dets = []
    for score, source_index, level_pos, i, j, k in candidates[: cfg.top_k]:
        stride = DEFAULT_PYRAMID.strides[level_pos]
        level = DEFAULT_PYRAMID.levels[level_pos]
        anchor = Anchor(Point((j + 0.5) * stride, (i + 0.5) * stride),
                        shapes[k][0], shapes[k][1], level)
        delta = level_maps[level_pos][1].data[8 * k: 8 * k + 8, i, j]
        try:
            quad = decode(anchor, tuple(delta))
        except DegenerateQuad:
            continue
        dets.append(Detection(quad, score, 0, source_index))
    kept = quad_nms(dets, cfg.nms_iou)
    _write_lines(args.out, [DETECTION_HEADER] + [_format_detection(d) for d in kept])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadprop",
        description="Quadrilateral region-proposal toolkit for aerial imagery")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--out", help="output file (default stdout)")

    p = sub.add_parser("iou", help="polygon IoU of two quads")
    p.add_argument("--a", required=True, help="x1,y1,...,y4")
    p.add_argument("--b", required=True, help="x1,y1,...,y4")
    p.add_argument("--config")
    p.set_defaults(func=cmd_iou)

    p = sub.add_parser("anchors", help="dump grid anchors as CSV")
    add_common(p)
    p.add_argument("--base", type=float, help="anchor base size (default 16)")
    p.add_argument("--scales", type=_parse_floats, help="e.g. 4,8,16,32,64")
    p.add_argument("--ratios", type=_parse_ratios, help="e.g. 1:1,1:2,2:1,1:8,8:1")
    p.add_argument("--grid", required=True, help="feature grid as HxW")
    p.add_argument("--stride", type=int, required=True)
    p.add_argument("--level", type=int, default=0)
    p.set_defaults(func=cmd_anchors)

    p = sub.add_parser("nms", help="per-class NMS over a detection CSV")
    add_common(p)
    p.add_argument("--iou", type=float, help="suppression threshold (default 0.5)")
    p.add_argument("--input", help="detections CSV (default stdin)")
    p.set_defaults(func=cmd_nms)

    p = sub.add_parser("tile", help="plan overlapping windows for a large scene")
    add_common(p)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--tile", type=int, help="window side (default 1024)")
    p.add_argument("--overlap", type=int, help="window overlap (default 200)")
    p.set_defaults(func=cmd_tile)

    p = sub.add_parser("merge", help="merge per-window detections into scene space")
    add_common(p)
    p.add_argument("--windows", required=True, help="windows CSV from 'tile'")
    p.add_argument("--dets-dir", required=True,
                   help="directory of tile_NNN.csv detection files")
    p.add_argument("--iou", type=float, help="dedup NMS threshold (default 0.5)")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("eval", help="per-class AP and mean over a corpus")
    p.add_argument("--config")
    p.add_argument("--gt", help="directory of <image_id>.txt annotation files")
    p.add_argument("--dets", help="directory of Task1_<category>.txt files")
    p.add_argument("--iou", type=float, help="match threshold (default 0.5)")
    p.add_argument("--method", choices=("continuous", "eleven_point"))
    p.add_argument("--ap-values",
                   help="15 comma-separated per-class AP values to aggregate")
    p.add_argument("--out-csv", help="write the per-class table as CSV")
    p.add_argument("--out-json", help="write the per-class table as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="write a synthetic scene (PGM + annotations)")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, default=10, help="object count")
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--size-min", type=float, default=16.0)
    p.add_argument("--size-max", type=float, default=48.0)
    p.add_argument("--angle-min", type=float, default=0.0)
    p.add_argument("--angle-max", type=float, default=180.0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("detect", help="run the toy detection path on a PGM image")
    add_common(p)
    p.add_argument("--image", required=True, help="input PGM (sides divisible by 32)")
    p.add_argument("--seed", type=int)
    p.add_argument("--score-thr", type=float, dest="score_thr")
    p.add_argument("--top-k", type=int, dest="top_k")
    p.add_argument("--nms-iou", type=float, dest="nms_iou")
    p.add_argument("--lateral-channels", type=int, dest="lateral_channels")
    p.add_argument("--base", type=float)
    p.add_argument("--scales", type=_parse_floats)
    p.add_argument("--ratios", type=_parse_ratios)
    p.set_defaults(func=cmd_detect)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, DegenerateQuad, ShapeError, PlacementError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except QuadpropError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
