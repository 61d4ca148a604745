"""Event detector tests with the independent rule validator and the
brute-force run enumerator."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zstripe.errors import UnorderedInput
from zstripe.events import (
    DetectParams,
    EventWindow,
    FrameActivation,
    activations_from_codes,
    detect_events,
    read_activations_csv,
    read_events_csv,
    write_activations_csv,
    write_events_csv,
    _segment_runs,
)
from zstripe.zorder import MortonRecord, Quantizer, morton_encode


def validate_event(window: EventWindow, activations: list[FrameActivation],
                   params: DetectParams) -> bool:
    """From-scratch check of the confirmation conditions over a window."""
    inside = [fa for fa in activations
              if window.start_frame <= fa.frame <= window.end_frame
              and fa.active_cells]
    if not inside:
        return False
    if inside[0].frame != window.start_frame or inside[-1].frame != window.end_frame:
        return False
    seq = []
    for fa in inside:
        vals = fa.values
        best = max(range(6), key=lambda i: (vals[i], -i)) + 1
        if not seq or seq[-1] != best:
            seq.append(best)
    if len(seq) < params.min_distinct_cells:
        return False
    if params.require_both_sides:
        if not (set(seq) & {1, 2, 3} and set(seq) & {4, 5, 6}):
            return False
    if any(abs(b - a) > params.max_cell_jump for a, b in zip(seq, seq[1:])):
        return False
    if window.end_frame - window.start_frame + 1 < params.min_event_frames:
        return False
    expect = ("left_to_right" if seq[0] < seq[-1]
              else "right_to_left" if seq[0] > seq[-1] else "unknown")
    return window.direction == expect


def brute_force_detect(activations: list[FrameActivation],
                       params: DetectParams) -> list[EventWindow]:
    """Independent enumeration: split active frames into maximal runs by the
    gap rule, then apply the confirmation conditions to each run."""
    active = [fa for fa in activations if fa.active_cells]
    runs: list[list[FrameActivation]] = []
    for fa in active:
        if runs and fa.frame - runs[-1][-1].frame - 1 <= params.gap_tolerance:
            runs[-1].append(fa)
        else:
            runs.append([fa])
    events = []
    for run in runs:
        seq = []
        for fa in run:
            vals = fa.values
            best = max(range(6), key=lambda i: (vals[i], -i)) + 1
            if not seq or seq[-1] != best:
                seq.append(best)
        start, end = run[0].frame, run[-1].frame
        if len(seq) < params.min_distinct_cells:
            continue
        if params.require_both_sides and not (
                set(seq) & {1, 2, 3} and set(seq) & {4, 5, 6}):
            continue
        if any(abs(b - a) > params.max_cell_jump for a, b in zip(seq, seq[1:])):
            continue
        if end - start + 1 < params.min_event_frames:
            continue
        direction = ("left_to_right" if seq[0] < seq[-1]
                     else "right_to_left" if seq[0] > seq[-1] else "unknown")
        peak = max(float(fa.values.max()) for fa in run)
        events.append(EventWindow(start, end, "of", direction, peak))
    return events


def _acts(spec: dict[int, dict[int, float]]) -> list[FrameActivation]:
    """Build activations from {frame: {cell: value}}."""
    out = []
    for frame in sorted(spec):
        vals = np.zeros(6)
        for cell, v in spec[frame].items():
            vals[cell - 1] = v
        out.append(FrameActivation(frame, vals))
    return out


def random_activations(rng: np.random.Generator, frames: int,
                       density: float = 0.25) -> list[FrameActivation]:
    out = []
    for t in range(frames):
        vals = np.zeros(6)
        if rng.random() < density:
            for cell in rng.choice(6, size=rng.integers(1, 3), replace=False):
                vals[cell] = rng.uniform(76.0, 180.0)
        out.append(FrameActivation(t, vals))
    return out


def test_activations_decode_examples():
    q = Quantizer.for_variant("cnn")
    recs = [MortonRecord(7, morton_encode((0, 128, 0, 0, 0, 0), 8))]
    acts = activations_from_codes(recs, q)
    assert acts[0].frame == 7
    assert acts[0].active_cells == {2}
    assert acts[0].values[1] == pytest.approx(128 / 255)


def test_activations_all_zero_stream():
    q = Quantizer.for_variant("of")
    acts = activations_from_codes([MortonRecord(t, 0) for t in range(10)], q)
    assert all(not fa.active_cells for fa in acts)


def test_activations_of_consecutive_cells():
    q = Quantizer.for_variant("of")
    recs = [
        MortonRecord(3, morton_encode((0, 0, 110, 0, 0, 0), 8)),
        MortonRecord(4, morton_encode((0, 0, 0, 120, 0, 0), 8)),
    ]
    acts = activations_from_codes(recs, q)
    assert acts[0].active_cells == {3}
    assert acts[1].active_cells == {4}


def test_activations_unordered():
    q = Quantizer.for_variant("of")
    with pytest.raises(UnorderedInput):
        activations_from_codes([MortonRecord(4, 0), MortonRecord(3, 0)], q)


def test_detect_worked_example_ltr():
    spec = {}
    for f in range(0, 5):
        spec[f] = {1: 100.0}
    for f in range(5, 10):
        spec[f] = {2: 100.0}
    for f in range(10, 15):
        spec[f] = {3: 100.0}
    for f in range(15, 20):
        spec[f] = {4: 100.0}
    events = detect_events(_acts(spec))
    assert len(events) == 1
    ev = events[0]
    assert (ev.start_frame, ev.end_frame) == (0, 19)
    assert ev.direction == "left_to_right"
    assert ev.peak_value == pytest.approx(100.0)


def test_detect_one_side_only_rejected():
    spec = {f: {1 + (f // 5) % 3: 90.0} for f in range(30)}
    assert detect_events(_acts(spec)) == []


def test_detect_jump_rejected():
    spec = {}
    for f in range(0, 6):
        spec[f] = {1: 90.0}
    for f in range(6, 12):
        spec[f] = {4: 90.0}  # 1 -> 4 jumps 3 > 2
    assert detect_events(_acts(spec)) == []


def test_detect_empty_stream():
    assert detect_events([]) == []


def test_gap_splits_runs():
    spec = {}
    for f in range(0, 10):
        spec[f] = {1 + f // 4: 90.0}
    for f in range(40, 50):
        spec[f] = {4 + (f - 40) // 4: 90.0}
    events = detect_events(_acts(spec), DetectParams(gap_tolerance=10))
    assert events == []  # each half lacks the other side
    merged = detect_events(_acts(spec), DetectParams(gap_tolerance=40))
    assert len(merged) == 1


def test_direction_unknown_on_equal_ends():
    spec = {0: {2: 90.0}, 1: {3: 90.0}, 2: {4: 90.0}, 3: {3: 90.0}, 4: {2: 90.0}}
    events = detect_events(_acts(spec), DetectParams(min_event_frames=5))
    assert len(events) == 1
    assert events[0].direction == "unknown"


def test_min_event_frames_rejects_short():
    spec = {0: {3: 90.0}, 1: {4: 90.0}, 2: {5: 90.0}}
    p = DetectParams(min_distinct_cells=3, min_event_frames=5)
    assert detect_events(_acts(spec), p) == []


def test_of_multi_active_collapses_to_strongest():
    spec = {
        0: {1: 90.0}, 1: {1: 90.0}, 2: {2: 120.0, 1: 80.0},
        3: {3: 100.0}, 4: {4: 100.0, 6: 90.0},
    }
    events = detect_events(_acts(spec))
    assert len(events) == 1
    assert events[0].direction == "left_to_right"


def test_detector_matches_brute_force_randomized():
    rng = np.random.default_rng(16)
    params = DetectParams()
    for _ in range(300):
        acts = random_activations(rng, int(rng.integers(0, 120)))
        assert detect_events(acts, params) == brute_force_detect(acts, params)


def test_detected_events_pass_validator():
    rng = np.random.default_rng(17)
    params = DetectParams(gap_tolerance=int(3))
    for _ in range(300):
        acts = random_activations(rng, 100, density=0.5)
        for ev in detect_events(acts, params):
            assert validate_event(ev, acts, params)


def test_reversal_symmetry():
    rng = np.random.default_rng(18)
    params = DetectParams()
    for _ in range(100):
        acts = random_activations(rng, 80, density=0.4)
        events = detect_events(acts, params)
        top = max((fa.frame for fa in acts), default=0)
        mirrored = [FrameActivation(top - fa.frame, fa.values[::-1].copy())
                    for fa in reversed(acts)]
        mirrored_events = detect_events(mirrored, params)
        assert len(events) == len(mirrored_events)
        flip = {"left_to_right": "right_to_left",
                "right_to_left": "left_to_right", "unknown": "unknown"}
        for ev, mev in zip(sorted(events, key=lambda e: e.start_frame),
                           sorted(mirrored_events, key=lambda e: top - e.end_frame)):
            assert mev.start_frame == top - ev.end_frame
            assert mev.end_frame == top - ev.start_frame
            assert mev.direction == flip[ev.direction]


def test_run_count_monotone_in_gap_tolerance():
    rng = np.random.default_rng(19)
    for _ in range(50):
        acts = [fa for fa in random_activations(rng, 150) if fa.active_cells]
        counts = [len(_segment_runs(acts, g)) for g in range(0, 30, 3)]
        assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_events_csv_round_trip(tmp_path):
    events = [EventWindow(3, 40, "of", "left_to_right", 123.5),
              EventWindow(60, 90, "of", "right_to_left", 80.25)]
    path = tmp_path / "ev.csv"
    write_events_csv(events, path, scenario_id="s9")
    back = read_events_csv(path)
    assert set(back) == {"s9"}
    assert [(e.start_frame, e.end_frame, e.direction) for e in back["s9"]] == \
        [(3, 40, "left_to_right"), (60, 90, "right_to_left")]


def test_activations_csv_round_trip(tmp_path):
    acts = _acts({0: {1: 90.0}, 2: {3: 100.0, 5: 85.5}})
    path = tmp_path / "acts.csv"
    write_activations_csv(acts, path)
    back = read_activations_csv(path)
    assert [fa.frame for fa in back] == [0, 2]
    assert back[1].active_cells == {3, 5}
