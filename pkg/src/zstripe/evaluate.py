"""Scenario-level scoring and synthetic scenario generation.

Scoring is scenario-level: a positive scenario is a true positive iff some
predicted event overlaps its truth window with temporal IoU at or above the
match gate (default 0.1); localization quality is reported separately as
the mean best IoU over matched positives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import GeometryError, InvalidTiming, UnknownScenario
from .events import EventWindow
from .grid import DEFAULT_ROI
from .media_io import FrameSequence, GroundTruthEvent, SaliencySequence


@dataclass
class MetricsReport:
    """Confusion counts plus the derived Table-style rates."""

    tp: int
    fp: int
    tn: int
    fn: int
    mean_iou: float
    fps: float = 0.0

    @property
    def sensitivity(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def specificity(self) -> float:
        return self.tn / (self.tn + self.fp) if self.tn + self.fp else 0.0

    @property
    def f1(self) -> float:
        denom = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / denom if denom else 0.0


def temporal_iou(a: tuple[int, int], b: tuple[int, int]) -> float:
    """Intersection over union of two inclusive frame intervals."""
    inter = min(a[1], b[1]) - max(a[0], b[0]) + 1
    if inter <= 0:
        return 0.0
    union = (a[1] - a[0] + 1) + (b[1] - b[0] + 1) - inter
    return inter / union


def match_and_score(predicted: dict[str, list[EventWindow]],
                    truth: list[GroundTruthEvent],
                    iou_threshold: float = 0.1) -> MetricsReport:
    """Scenario-level confusion matrix against ground truth.

    Scenarios in ``truth`` without a key in ``predicted`` count as having
    no predictions. A prediction for an unknown scenario raises.
    """
    truth_ids = {ev.scenario_id for ev in truth}
    for scenario in predicted:
        if scenario not in truth_ids:
            raise UnknownScenario(f"prediction for unknown scenario {scenario!r}")
    tp = fp = tn = fn = 0
    matched_ious: list[float] = []
    for gt in sorted(truth, key=lambda ev: ev.scenario_id):
        events = predicted.get(gt.scenario_id, [])
        if gt.is_positive:
            ious = [temporal_iou((ev.start_frame, ev.end_frame),
                                 (gt.start_frame, gt.end_frame)) for ev in events]
            best = max(ious, default=0.0)
            if best >= iou_threshold:
                tp += 1
                matched_ious.append(best)
            else:
                fn += 1
        else:
            if events:
                fp += 1
            else:
                tn += 1
    mean_iou = float(np.mean(matched_ious)) if matched_ious else 0.0
    return MetricsReport(tp=tp, fp=fp, tn=tn, fn=fn, mean_iou=mean_iou)


def throughput(frame_count: int, elapsed: float) -> float:
    """Frames processed per wall-clock second."""
    if frame_count < 1:
        raise InvalidTiming(f"frame_count {frame_count} < 1")
    if elapsed <= 0.0:
        raise InvalidTiming(f"elapsed {elapsed} <= 0")
    return frame_count / elapsed


def write_metrics_csv(reports: dict[str, MetricsReport], path: Path | str) -> None:
    """One row per variant, mirroring the reported metric columns."""
    lines = ["variant,f1,sensitivity,specificity,mean_iou,fps"]
    for variant in sorted(reports):
        r = reports[variant]
        lines.append(f"{variant},{r.f1:.6f},{r.sensitivity:.6f},"
                     f"{r.specificity:.6f},{r.mean_iou:.6f},{r.fps:.3f}")
    Path(path).write_text("\n".join(lines) + "\n")


# --- synthetic scenarios -------------------------------------------------------

# Background drift in px/frame (downward, the ego-motion stand-in). Kept well
# below mover speeds so a cell's mean-flow angle flips within a few frames of
# the mover entering it: each cell entry then fires a short burst of
# above-threshold angle differences before the baseline window catches up,
# which is the stripe signature the detector strings together.
_EGO_DRIFT = 0.03


def _textured_canvas(height: int, width: int, rng: np.random.Generator) -> np.ndarray:
    noise = rng.random((height, width))
    smooth = gaussian_filter(noise, sigma=2.5, mode="wrap")
    lo, hi = smooth.min(), smooth.max()
    return (0.25 + 0.5 * (smooth - lo) / (hi - lo)).astype(np.float32)


def _drifting_background(width: int, height: int, frame_count: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Frames of seeded texture translating downward by _EGO_DRIFT px/frame."""
    pad = int(math.ceil(_EGO_DRIFT * max(frame_count - 1, 0))) + 2
    canvas = _textured_canvas(height + pad, width, rng)
    frames = np.empty((frame_count, height, width), dtype=np.float32)
    for t in range(frame_count):
        off = (frame_count - 1 - t) * _EGO_DRIFT
        y0 = int(math.floor(off))
        w = np.float32(off - y0)
        frames[t] = (1 - w) * canvas[y0:y0 + height] + w * canvas[y0 + 1:y0 + 1 + height]
    return frames


def _draw_patch(frame: np.ndarray, patch: np.ndarray, xc: float, yc: float) -> None:
    """Paint the mover texture centered at (xc, yc), clipped to the frame."""
    h, w = frame.shape
    rh, rw = patch.shape
    x0 = int(math.floor(xc - rw / 2 + 0.5))
    y0 = int(math.floor(yc - rh / 2 + 0.5))
    fx0, fy0 = max(0, x0), max(0, y0)
    fx1, fy1 = min(w, x0 + rw), min(h, y0 + rh)
    if fx1 > fx0 and fy1 > fy0:
        frame[fy0:fy1, fx0:fx1] = patch[fy0 - y0:fy1 - y0, fx0 - x0:fx1 - x0]


def _saliency_blob(width: int, height: int, xc: float, yc: float,
                   sigma: float) -> np.ndarray:
    ys = np.arange(height, dtype=np.float32)[:, None]
    xs = np.arange(width, dtype=np.float32)[None, :]
    blob = np.exp(-((xs - xc) ** 2 + (ys - yc) ** 2) / (2.0 * sigma * sigma))
    peak = blob.max()
    return (blob / peak).astype(np.float32) if peak > 0 else blob.astype(np.float32)


def _mover_patch(width: int, height: int, rng: np.random.Generator,
                 roi_fractions: tuple[float, float, float, float]
                 ) -> tuple[np.ndarray, float]:
    """Near-field pedestrian stand-in sized against the grid cells.

    The mover must dominate a cell's mean flow when inside it, so it is
    textured (its interior carries flow, not just its edges), about 60% of
    a cell column wide, and taller than the RoI band.
    """
    x0, y0, x1, y1 = roi_fractions
    cell_w = (0.45 - x0) * width / 3.0  # left block split into 3 columns
    rw = max(8, int(round(0.6 * cell_w)))
    rh = max(16, int(round(1.1 * (y1 - y0) * height)))
    yc = 0.5 * (y0 + y1) * height
    noise = gaussian_filter(rng.random((rh, rw)), sigma=1.5, mode="wrap")
    lo, hi = noise.min(), noise.max()
    patch = (0.22 * (noise - lo) / (hi - lo)).astype(np.float32)
    return patch, yc


def generate_crossing(width: int, height: int, frame_count: int,
                      start_side: str = "left",
                      speed_px_per_frame: float = 4.0,
                      texture_seed: int = 0,
                      scenario_id: str = "synth",
                      roi_fractions: tuple[float, float, float, float] = DEFAULT_ROI,
                      ) -> tuple[FrameSequence, SaliencySequence, GroundTruthEvent]:
    """Deterministic crossing scenario with an analytically known GT window.

    A contrasting rectangle translates horizontally through the RoI over a
    textured background that drifts slowly downward. The companion
    pseudo-saliency is a max-normalized Gaussian blob on the rectangle.
    The truth window is the frames whose continuous rectangle center lies
    within [roi_x0 * width, roi_x1 * width].
    """
    if width < 64 or height < 64:
        raise GeometryError(f"need at least 64x64, got {width}x{height}")
    if start_side not in ("left", "right"):
        raise GeometryError(f"start_side must be left or right, not {start_side!r}")
    if speed_px_per_frame <= 0:
        raise GeometryError("speed must be positive or the path never crosses")
    if frame_count < 2:
        raise GeometryError("need at least 2 frames")
    rng = np.random.default_rng(texture_seed)
    frames = _drifting_background(width, height, frame_count, rng)
    patch, yc = _mover_patch(width, height, rng, roi_fractions)
    rh, rw = patch.shape
    x_begin = float(rw)
    sal = np.zeros_like(frames)
    centers = np.empty(frame_count, dtype=np.float64)
    for t in range(frame_count):
        xc_left = x_begin + speed_px_per_frame * t
        xc = xc_left if start_side == "left" else width - xc_left
        centers[t] = xc
        _draw_patch(frames[t], patch, xc, yc)
        sal[t] = _saliency_blob(width, height, xc, yc, sigma=(rw + rh) / 4.0)
    lo, hi = roi_fractions[0] * width, roi_fractions[2] * width
    inside = np.nonzero((centers >= lo) & (centers <= hi))[0]
    if inside.size == 0:
        raise GeometryError("mover never enters the RoI; increase frame_count or speed")
    label = "crossing_lr" if start_side == "left" else "crossing_rl"
    gt = GroundTruthEvent(scenario_id, int(inside[0]), int(inside[-1]), label)
    return (FrameSequence(width, height, frames),
            SaliencySequence(width, height, sal),
            gt)


def generate_non_crossing(width: int, height: int, frame_count: int,
                          kind: str = "static",
                          texture_seed: int = 0,
                          scenario_id: str = "synth_neg",
                          ) -> tuple[FrameSequence, SaliencySequence, GroundTruthEvent]:
    """Negative scenarios: 'static' has only the ego drift, 'vertical' adds
    a mover travelling parallel to the expected flow direction."""
    if width < 64 or height < 64:
        raise GeometryError(f"need at least 64x64, got {width}x{height}")
    if kind not in ("static", "vertical"):
        raise GeometryError(f"kind must be static or vertical, not {kind!r}")
    rng = np.random.default_rng(texture_seed)
    frames = _drifting_background(width, height, frame_count, rng)
    sal = np.zeros_like(frames)
    if kind == "vertical":
        patch, _ = _mover_patch(width, height, rng, DEFAULT_ROI)
        rh, rw = patch.shape
        xc = 0.30 * width
        speed = max(2.0, 1.5 * height / max(frame_count - 1, 1))
        for t in range(frame_count):
            yc = -rh / 2 + speed * t
            _draw_patch(frames[t], patch, xc, yc)
            sal[t] = _saliency_blob(width, height, xc, yc, sigma=(rw + rh) / 4.0)
    gt = GroundTruthEvent(scenario_id, -1, -1, "none")
    return (FrameSequence(width, height, frames),
            SaliencySequence(width, height, sal),
            gt)
