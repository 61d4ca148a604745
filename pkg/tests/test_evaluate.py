"""Scoring and synthetic-scenario tests."""

from __future__ import annotations

import hashlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zstripe.errors import GeometryError, InvalidTiming, UnknownScenario
from zstripe.evaluate import (
    MetricsReport,
    generate_crossing,
    generate_non_crossing,
    match_and_score,
    temporal_iou,
    throughput,
    write_metrics_csv,
)
from zstripe.events import EventWindow
from zstripe.grid import DEFAULT_ROI
from zstripe.media_io import GroundTruthEvent


def _ev(start, end):
    return EventWindow(start, end, "of", "left_to_right", 90.0)


def test_iou_identity():
    assert temporal_iou((10, 50), (10, 50)) == 1.0


def test_iou_hand_counted_31_over_51():
    assert temporal_iou((10, 50), (20, 60)) == pytest.approx(31 / 51)


def test_iou_disjoint():
    assert temporal_iou((0, 5), (10, 20)) == 0.0


def test_iou_single_frame_touch():
    assert temporal_iou((5, 10), (10, 15)) == pytest.approx(1 / 11)


@given(st.integers(0, 500), st.integers(0, 100), st.integers(0, 500),
       st.integers(0, 100))
@settings(max_examples=200, deadline=None)
def test_iou_symmetric_and_bounded(a0, alen, b0, blen):
    a = (a0, a0 + alen)
    b = (b0, b0 + blen)
    iou = temporal_iou(a, b)
    assert iou == temporal_iou(b, a)
    assert 0.0 <= iou <= 1.0
    assert (iou == 1.0) == (a == b)


def test_match_and_score_worked_example():
    truth = [
        GroundTruthEvent("p1", 10, 50, "crossing_lr"),
        GroundTruthEvent("p2", 0, 30, "crossing_rl"),
        GroundTruthEvent("n1", -1, -1, "none"),
        GroundTruthEvent("n2", -1, -1, "none"),
    ]
    predicted = {
        "p1": [_ev(10, 50)],              # IoU 1.0
        "p2": [_ev(0, 19)],               # IoU 20/31... adjusted below
        "n1": [_ev(5, 9)],                # false alarm
    }
    # make p2's best IoU exactly 0.6: predict [0, 17] against [0, 29]
    truth[1] = GroundTruthEvent("p2", 0, 29, "crossing_rl")
    predicted["p2"] = [_ev(0, 17)]
    report = match_and_score(predicted, truth)
    assert (report.tp, report.fn, report.fp, report.tn) == (2, 0, 1, 1)
    assert report.sensitivity == 1.0
    assert report.specificity == 0.5
    assert report.f1 == pytest.approx(0.8)
    assert report.mean_iou == pytest.approx(0.8)


def test_match_and_score_no_predictions():
    truth = [GroundTruthEvent("p", 0, 10, "crossing_lr"),
             GroundTruthEvent("n", -1, -1, "none")]
    report = match_and_score({}, truth)
    assert (report.tp, report.fn, report.fp, report.tn) == (0, 1, 0, 1)
    assert report.sensitivity == 0.0
    assert report.specificity == 1.0


def test_match_and_score_unknown_scenario():
    truth = [GroundTruthEvent("a", -1, -1, "none")]
    with pytest.raises(UnknownScenario):
        match_and_score({"ghost": [_ev(0, 1)]}, truth)


def test_match_below_threshold_is_fn():
    truth = [GroundTruthEvent("p", 0, 9, "crossing_lr")]
    report = match_and_score({"p": [_ev(100, 110)]}, truth, iou_threshold=0.1)
    assert (report.tp, report.fn) == (0, 1)


def test_counts_partition_scenarios():
    rng = np.random.default_rng(20)
    truth = []
    predicted = {}
    for i in range(40):
        sid = f"s{i}"
        if rng.random() < 0.5:
            truth.append(GroundTruthEvent(sid, 10, 60, "crossing_lr"))
        else:
            truth.append(GroundTruthEvent(sid, -1, -1, "none"))
        if rng.random() < 0.6:
            start = int(rng.integers(0, 80))
            predicted[sid] = [_ev(start, start + int(rng.integers(1, 60)))]
    report = match_and_score(predicted, truth)
    positives = sum(ev.is_positive for ev in truth)
    assert report.tp + report.fn == positives
    assert report.fp + report.tn == len(truth) - positives
    assert report.tp + report.fn + report.fp + report.tn == len(truth)


def test_throughput_values():
    assert throughput(100, 5.0) == pytest.approx(20.0)
    assert throughput(1, 1.0) == 1.0


def test_throughput_invalid():
    with pytest.raises(InvalidTiming):
        throughput(0, 1.0)
    with pytest.raises(InvalidTiming):
        throughput(10, 0.0)


def test_metrics_csv(tmp_path):
    report = MetricsReport(tp=2, fp=1, tn=1, fn=0, mean_iou=0.8, fps=21.88)
    path = tmp_path / "metrics.csv"
    write_metrics_csv({"of": report}, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "variant,f1,sensitivity,specificity,mean_iou,fps"
    assert lines[1].startswith("of,0.800000,1.000000,0.500000,0.800000,21.880")


def _crossing_entry_exit(width, x_begin, speed, frame_count, start_side):
    """Closed-form kinematics oracle for the GT window."""
    lo, hi = DEFAULT_ROI[0] * width, DEFAULT_ROI[2] * width
    inside = []
    for t in range(frame_count):
        xc = x_begin + speed * t
        if start_side == "right":
            xc = width - xc
        if lo <= xc <= hi:
            inside.append(t)
    return inside[0], inside[-1]


def test_crossing_gt_matches_kinematics_oracle():
    width, height, fc, speed = 640, 480, 120, 4.0
    frames, sal, gt = generate_crossing(width, height, fc, "left", speed, 0)
    rw = frames_rw(width)
    start, end = _crossing_entry_exit(width, float(rw), speed, fc, "left")
    assert (gt.start_frame, gt.end_frame) == (start, end)
    assert gt.label == "crossing_lr"
    assert len(frames) == len(sal) == fc


def frames_rw(width):
    # mover width mirrors the generator's sizing rule
    cell_w = (0.45 - 0.15) * width / 3.0
    return max(8, int(round(0.6 * cell_w)))


def test_crossing_mirror_gt_identical():
    _, _, gt_l = generate_crossing(320, 240, 100, "left", 3.0, 5)
    _, _, gt_r = generate_crossing(320, 240, 100, "right", 3.0, 5)
    assert (gt_l.start_frame, gt_l.end_frame) == (gt_r.start_frame, gt_r.end_frame)
    assert gt_r.label == "crossing_rl"


def test_crossing_determinism_bit_identical():
    a = generate_crossing(128, 96, 40, "left", 3.0, texture_seed=42)
    b = generate_crossing(128, 96, 40, "left", 3.0, texture_seed=42)
    for x, y in ((a[0].frames, b[0].frames), (a[1].frames, b[1].frames)):
        assert hashlib.sha256(x.tobytes()).digest() == \
            hashlib.sha256(y.tobytes()).digest()
    c = generate_crossing(128, 96, 40, "left", 3.0, texture_seed=43)
    assert a[0].frames.tobytes() != c[0].frames.tobytes()


def test_crossing_zero_speed_rejected():
    with pytest.raises(GeometryError):
        generate_crossing(128, 96, 40, "left", 0.0, 0)


def test_crossing_too_small_rejected():
    with pytest.raises(GeometryError):
        generate_crossing(32, 96, 40, "left", 2.0, 0)


def test_crossing_bad_side_rejected():
    with pytest.raises(GeometryError):
        generate_crossing(128, 96, 40, "up", 2.0, 0)


def test_crossing_saliency_normalized():
    _, sal, _ = generate_crossing(128, 96, 20, "left", 3.0, 1)
    for t in range(len(sal)):
        assert sal.frames[t].max() == pytest.approx(1.0)
        assert sal.frames[t].min() >= 0.0


def test_non_crossing_kinds():
    for kind in ("static", "vertical"):
        frames, sal, gt = generate_non_crossing(128, 96, 30, kind, 2)
        assert gt.label == "none"
        assert gt.start_frame == gt.end_frame == -1
        assert len(frames) == 30
    with pytest.raises(GeometryError):
        generate_non_crossing(128, 96, 30, "sideways", 2)
