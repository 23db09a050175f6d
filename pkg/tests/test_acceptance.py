"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the criterion
lines; every tolerance and runtime budget is asserted inside the tests.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from quadprop.anchors import Anchor, AnchorSpec, anchor_shapes, grid_anchors
from quadprop.boxcoder import decode, encode
from quadprop.dota_io import (CATEGORIES, AnnotationRecord, ParseStats,
                              parse_annotations, parse_detections, tile_plan,
                              write_annotations, write_detections)
from quadprop.evaluation import evaluate, mean_ap
from quadprop.geometry import Point, canonicalize, iou
from quadprop.model import FeatureMap, backbone_forward, fpn_fuse, smooth_l1, softmax_ce
from quadprop.postprocess import Detection, quad_nms
from quadprop.synth import generate_scene, oracle_score

from oracles import (brute_force_nms, central_difference, random_convex_quad,
                     raster_iou, rect_quad)

AP_ROW_A = (0.755, 0.404, 0.372, 0.463, 0.443, 0.518, 0.740, 0.888,
            0.559, 0.771, 0.565, 0.600, 0.582, 0.487, 0.336)
AP_ROW_B = (0.802, 0.696, 0.096, 0.559, 0.402, 0.155, 0.277, 0.891,
            0.669, 0.618, 0.467, 0.523, 0.178, 0.449, 0.334)


@contextmanager
def criterion(num, name, limit_s):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"\ncriterion {num:02d} {name}: FAIL")
        raise
    elapsed = time.perf_counter() - t0
    print(f"\ncriterion {num:02d} {name}: PASS ({elapsed:.1f}s)")
    assert elapsed < limit_s, f"runtime {elapsed:.1f}s exceeds {limit_s}s budget"


def row_mean(values):
    from quadprop.evaluation import ClassAP
    return mean_ap([ClassAP(c, v, 0, 0) for c, v in zip(CATEGORIES, values)])


def test_criterion_01_table_aggregation():
    with criterion(1, "table aggregation", 1.0):
        mean_b = row_mean(AP_ROW_B)
        assert abs(mean_b - 0.474) <= 0.0005, f"row B mean {mean_b:.6f}"
        mean_a = row_mean(AP_ROW_A)
        assert abs(mean_a - 0.565) <= 0.0005, (
            f"row A mean {mean_a:.6f} differs from 0.565 by "
            f"{abs(mean_a - 0.565):.6f} (> 0.0005)")


def test_criterion_02_anchor_configuration():
    with criterion(2, "anchor configuration", 1.0):
        spec = AnchorSpec()
        shapes = anchor_shapes(spec)
        assert len(shapes) == 25
        square = anchor_shapes(AnchorSpec(16, (4,), ((1, 1),)))[0]
        assert square == (64.0, 64.0)
        flat_scales = [s for s in spec.scales for _ in spec.ratios]
        for (w, h), scale in zip(shapes, flat_scales):
            target = (16 * scale) ** 2
            assert abs(w * h - target) <= 1e-6 * target


def test_criterion_03_polygon_iou_oracle():
    with criterion(3, "polygon IoU vs rasterization oracle", 60.0):
        rng = np.random.default_rng(20240801)
        worst = 0.0
        for _ in range(1000):
            a = random_convex_quad(rng)
            cx = min(max(a.vertices[0].x + rng.uniform(-15, 15), 18.0), 82.0)
            cy = min(max(a.vertices[0].y + rng.uniform(-15, 15), 18.0), 82.0)
            b = random_convex_quad(rng, center=(cx, cy))
            worst = max(worst, abs(iou(a, b) - raster_iou(a, b)))
        assert worst <= 2e-3, f"worst oracle disagreement {worst:.2e}"

        unit = rect_quad(0, 0, 1, 1)
        r = math.sqrt(0.5)
        diamond = canonicalize([(0.5 + r * math.cos(math.radians(90 * k)),
                                 0.5 + r * math.sin(math.radians(90 * k)))
                                for k in range(4)])
        assert abs(iou(unit, diamond) - 0.707107) <= 1e-4


def test_criterion_04_coding_round_trip():
    with criterion(4, "coding round trip", 10.0):
        rng = np.random.default_rng(20240802)
        worst = 0.0
        for _ in range(100_000):
            anchor = Anchor(Point(rng.uniform(20, 80), rng.uniform(20, 80)),
                            rng.uniform(8, 60), rng.uniform(8, 60))
            gt = random_convex_quad(rng, r_min=5, r_max=30,
                                    center=(anchor.center.x, anchor.center.y))
            back = decode(anchor, encode(anchor, gt))
            for v, w in zip(back.vertices, gt.vertices):
                worst = max(worst, abs(v.x - w.x), abs(v.y - w.y))
        assert worst <= 1e-9, f"worst vertex error {worst:.2e}"


def test_criterion_05_nms_equivalence():
    with criterion(5, "NMS equals brute-force reference", 60.0):
        rng = np.random.default_rng(20240803)
        for trial in range(1000):
            n = int(rng.integers(1, 51))
            centers = rng.uniform(15, 85, (max(1, n // 6), 2))
            dets = []
            for i in range(n):
                cx, cy = centers[int(rng.integers(0, len(centers)))]
                quad = random_convex_quad(
                    rng, r_min=4, r_max=14,
                    center=(cx + rng.uniform(-6, 6), cy + rng.uniform(-6, 6)))
                dets.append(Detection(quad, float(rng.uniform(0, 1)), 0, i))
            thr = float(rng.uniform(0.1, 0.9))
            fast = quad_nms(dets, thr, fast_reject=True)
            assert fast == brute_force_nms(dets, thr), f"trial {trial}"
            assert fast == quad_nms(dets, thr, fast_reject=False), f"trial {trial}"


def test_criterion_06_gradient_checks():
    with criterion(6, "analytic gradients vs finite differences", 5.0):
        rng = np.random.default_rng(20240804)
        checked = 0
        while checked < 100:
            pred = rng.uniform(-3, 3, 8)
            target = rng.uniform(-3, 3, 8)
            if np.any(np.abs(np.abs(pred - target) - 1.0) < 1e-3):
                continue
            _, grad = smooth_l1(pred, target)
            fd = central_difference(lambda p: smooth_l1(p, target)[0], pred, h=1e-5)
            for g, f in zip(grad, fd):
                assert abs(g - f) <= 1e-5 * max(1.0, abs(f))
            checked += 1
        for _ in range(100):
            logits = rng.uniform(-4, 4, 15)
            label = int(rng.integers(0, 15))
            _, grad = softmax_ce(logits, label)
            fd = central_difference(lambda l: softmax_ce(l, label)[0], logits, h=1e-5)
            for g, f in zip(grad, fd):
                assert abs(g - f) <= 1e-6 * max(1.0, abs(f))


def test_criterion_07_pyramid_shapes():
    with criterion(7, "pyramid shapes and top-down isolation", 30.0):
        rng = np.random.default_rng(20240805)
        image = FeatureMap(rng.uniform(0, 1, (1, 1024, 1024)))
        taps = backbone_forward(image, seed=5)
        assert [(t.height, t.width) for t in taps] == [
            (256, 256), (128, 128), (64, 64), (32, 32)]
        fused = fpn_fuse(taps, lateral_channels=16, seed=5)
        assert [(f.height, f.width) for f in fused] == [
            (256, 256), (128, 128), (64, 64), (32, 32)]
        zeroed = [FeatureMap(np.zeros_like(taps[0].data))] + list(taps[1:])
        refused = fpn_fuse(zeroed, lateral_channels=16, seed=5)
        for a, b in zip(fused[1:], refused[1:]):
            assert np.array_equal(a.data, b.data)


def test_criterion_08_end_to_end_oracle():
    with criterion(8, "end-to-end oracle identity and degradation", 300.0):
        spec = AnchorSpec(16, (1, 2, 3), ((1, 1), (1, 2), (2, 1)))
        scenes = [generate_scene(seed, 256, 256, 10) for seed in range(20)]
        anchors = grid_anchors(spec, 8, 8, 32)
        means = []
        for eps in (0.0, 0.05, 0.2, 0.5):
            gts_by_image = {}
            dets_by_image = {}
            for scene in scenes:
                name = f"scene{scene.seed:05d}"
                gts_by_image[name] = list(scene.gts)
                dets = oracle_score(anchors, scene.gts, noise=eps, seed=scene.seed)
                kept = []
                for class_id in sorted({d.class_id for d in dets}):
                    kept.extend(quad_nms(
                        [d for d in dets if d.class_id == class_id], 0.5))
                dets_by_image[name] = kept
            per_class = evaluate(gts_by_image, dets_by_image, iou_thr=0.5,
                                 method="continuous")
            means.append(mean_ap(per_class, [c.category for c in per_class]))
        assert means[0] == 1.0, f"exact-oracle mAP {means[0]!r}"
        for lo, hi in zip(means[1:], means[:-1]):
            assert lo <= hi, f"mAP not non-increasing: {means}"


def test_criterion_09_tiling():
    with criterion(9, "tiling plan", 1.0):
        windows = tile_plan(4000, 4000, 1024, 200)
        assert len(windows) == 25
        xs = sorted({int(w.origin.x) for w in windows})
        ys = sorted({int(w.origin.y) for w in windows})
        assert xs == ys == [0, 824, 1648, 2472, 2976]
        covered_x = np.zeros(4000, dtype=bool)
        covered_y = np.zeros(4000, dtype=bool)
        for w in windows:
            covered_x[int(w.origin.x): int(w.origin.x) + w.width] = True
            covered_y[int(w.origin.y): int(w.origin.y) + w.height] = True
        assert covered_x.all() and covered_y.all()


def test_criterion_10_format_round_trips(tmp_path):
    with criterion(10, "annotation and detection round trips", 5.0):
        rng = np.random.default_rng(20240806)
        records = [AnnotationRecord(random_convex_quad(rng, r_min=3, r_max=40),
                                    CATEGORIES[i % 15], bool(i % 4 == 0))
                   for i in range(100)]
        header = "imagesource:GoogleEarth\ngsd:0.5\n"
        stats = ParseStats()
        again = parse_annotations(header + write_annotations(records), stats)
        assert again == records
        assert stats.skipped_lines == 2

        dets = [Detection(random_convex_quad(rng, r_min=3, r_max=30),
                          float(rng.uniform(0, 1)), int(rng.integers(0, 15)), i)
                for i in range(100)]
        write_detections(dets, "P0007", tmp_path)
        seen = 0
        for class_id, category in enumerate(CATEGORIES):
            text = (tmp_path / f"Task1_{category}.txt").read_text()
            rows = parse_detections(text)
            originals = sorted((d for d in dets if d.class_id == class_id),
                               key=lambda d: (-d.score, d.source_index))
            assert len(rows) == len(originals)
            for (image_id, score, quad), det in zip(rows, originals):
                assert image_id == "P0007"
                assert abs(score - det.score) <= 1e-6
                for a, b in zip(quad.flat(), det.quad.flat()):
                    assert abs(a - b) <= 1e-4
            seen += len(rows)
        assert seen == 100
