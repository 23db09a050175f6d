import numpy as np
import pytest

from quadprop.postprocess import Detection, filter_detections, quad_nms

from oracles import brute_force_nms, random_convex_quad, rect_quad


def random_detections(rng, n, n_classes=1):
    """Clustered detections so suppression actually happens."""
    centers = rng.uniform(15, 85, (max(1, n // 6), 2))
    dets = []
    for i in range(n):
        cx, cy = centers[int(rng.integers(0, len(centers)))]
        quad = random_convex_quad(rng, r_min=4, r_max=14,
                                  center=(cx + rng.uniform(-6, 6),
                                          cy + rng.uniform(-6, 6)))
        dets.append(Detection(quad, float(rng.uniform(0, 1)),
                              int(rng.integers(0, n_classes)), i))
    return dets


class TestQuadNms:
    def test_single_detection_kept(self):
        det = Detection(rect_quad(0, 0, 10, 10), 0.9, 0, 0)
        assert quad_nms([det], 0.5) == [det]

    def test_duplicate_suppressed(self):
        q = rect_quad(0, 0, 10, 10)
        a = Detection(q, 0.9, 0, 0)
        b = Detection(q, 0.8, 0, 1)
        assert quad_nms([a, b], 0.5) == [a]

    def test_empty_input(self):
        assert quad_nms([], 0.5) == []

    def test_threshold_one_keeps_non_identical(self):
        a = Detection(rect_quad(0, 0, 10, 10), 0.9, 0, 0)
        b = Detection(rect_quad(0, 0, 10, 9.99), 0.8, 0, 1)
        kept = quad_nms([a, b], 1.0)
        assert kept == [a, b]

    def test_tie_breaks_on_source_index(self):
        q = rect_quad(0, 0, 10, 10)
        a = Detection(q, 0.5, 0, 7)
        b = Detection(q, 0.5, 0, 3)
        assert quad_nms([a, b], 0.5) == [b]

    def test_matches_brute_force_reference(self):
        rng = np.random.default_rng(2024)
        for trial in range(100):
            dets = random_detections(rng, int(rng.integers(1, 51)))
            thr = float(rng.uniform(0.1, 0.9))
            assert quad_nms(dets, thr) == brute_force_nms(dets, thr)

    def test_fast_reject_is_bit_identical(self):
        rng = np.random.default_rng(99)
        for trial in range(50):
            dets = random_detections(rng, int(rng.integers(1, 51)))
            thr = float(rng.uniform(0.0, 1.0))
            assert quad_nms(dets, thr, fast_reject=True) == \
                quad_nms(dets, thr, fast_reject=False)

    def test_kept_pairwise_iou_below_threshold(self):
        from quadprop.geometry import iou
        rng = np.random.default_rng(31)
        dets = random_detections(rng, 40)
        thr = 0.35
        kept = quad_nms(dets, thr)
        for i, a in enumerate(kept):
            for b in kept[i + 1:]:
                assert iou(a.quad, b.quad) <= thr

    def test_output_is_score_sorted_subsequence(self):
        rng = np.random.default_rng(32)
        dets = random_detections(rng, 30)
        kept = quad_nms(dets, 0.4)
        ranks = sorted(range(len(dets)),
                       key=lambda i: (-dets[i].score, dets[i].source_index))
        positions = [ranks.index(dets.index(d)) for d in kept]
        assert positions == sorted(positions)

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(33)
        dets = random_detections(rng, 40)
        counts = [len(quad_nms(dets, t)) for t in (0.1, 0.3, 0.5, 0.7, 0.9)]
        assert counts == sorted(counts)

    def test_invalid_threshold_rejected(self):
        with pytest.raises(ValueError):
            quad_nms([], 1.5)


class TestFilterDetections:
    def make(self, scores):
        return [Detection(rect_quad(0, 0, 1, 1), s, 0, i)
                for i, s in enumerate(scores)]

    def test_no_op_when_permissive(self):
        dets = self.make([0.3, 0.9, 0.5])
        assert filter_detections(dets, 0.0, 10) == dets

    def test_all_below_threshold(self):
        assert filter_detections(self.make([0.1, 0.2]), 0.5, 10) == []

    def test_top_one_is_argmax(self):
        dets = self.make([0.3, 0.9, 0.5])
        assert filter_detections(dets, 0.0, 1) == [dets[1]]

    def test_stable_ties_prefer_earlier(self):
        dets = self.make([0.5, 0.5, 0.5])
        assert filter_detections(dets, 0.0, 2) == dets[:2]

    def test_preserves_input_order(self):
        dets = self.make([0.2, 0.8, 0.4, 0.9])
        assert filter_detections(dets, 0.3, 3) == [dets[1], dets[2], dets[3]]

    def test_score_invalid_rejected(self):
        with pytest.raises(ValueError):
            Detection(rect_quad(0, 0, 1, 1), 1.5, 0, 0)
