"""Per-frame 6-component feature vectors from cell-mean streams.

Two variants feed the Z-order transform: gated angle-difference magnitudes
from mean flow vectors, and gated mean saliencies. Angle convention:
theta = atan2(u, v) in degrees, so rightward motion maps to +90, leftward
to -90, and downward (the expected ego-motion direction) to 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, UnorderedInput
from .grid import CellMeans


@dataclass(frozen=True)
class OfParams:
    """Windows and thresholds for the optical-flow feature path.

    ``n`` recent frames are compared against the ``m`` preceding frames;
    ``delta`` gates the angle difference, ``alpha``/``theta`` gate the
    recent direction (within theta degrees of +alpha or -alpha).
    """

    n: int = 4
    m: int = 7
    delta: float = 75.0
    alpha: float = 90.0
    theta: float = 20.0

    def __post_init__(self) -> None:
        if self.n < 1 or self.m < 1:
            raise ValueError("window lengths n, m must be >= 1")
        if not 0.0 < self.delta <= 180.0:
            raise ValueError("delta must lie in (0, 180]")
        if not 0.0 <= self.alpha <= 180.0:
            raise ValueError("alpha must lie in [0, 180]")
        if not 0.0 < self.theta <= 90.0:
            raise ValueError("theta must lie in (0, 90]")


@dataclass(frozen=True)
class SaliencyParams:
    """Activation threshold on mean cell saliency. 0.2 suits synthetic
    footage, 0.35 real-world footage."""

    gamma: float = 0.2

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")


@dataclass(frozen=True)
class CellFeatureVector:
    """Six gated feature values for one frame; float32 so CSV round trips."""

    frame: int
    values: np.ndarray
    variant: str


def flow_angle(u: float, v: float) -> float:
    """Direction of a flow vector in degrees in (-180, 180]; (0,0) -> 0."""
    return math.degrees(math.atan2(u, v))


def circular_diff(a: float, b: float) -> float:
    """Absolute angle difference folded to [0, 180]."""
    d = abs(a - b) % 360.0
    return 360.0 - d if d > 180.0 else d


class OfFeatureExtractor:
    """Streaming extractor: push cell means in frame order, get features.

    The first n + m pushed frames emit all-zero vectors (warm-up), keeping
    feature streams frame-aligned with the ground truth.
    """

    def __init__(self, params: OfParams | None = None):
        self.params = params or OfParams()
        self._history: list[np.ndarray] = []
        self._last_frame: int | None = None
        self._count = 0

    def push(self, means: CellMeans) -> CellFeatureVector:
        if self._last_frame is not None and means.frame <= self._last_frame:
            raise UnorderedInput(
                f"frame {means.frame} after frame {self._last_frame}"
            )
        self._last_frame = means.frame
        p = self.params
        row = np.asarray(means.values, dtype=np.float64)
        self._history.append(row)
        if len(self._history) > p.n + p.m:
            self._history.pop(0)
        self._count += 1
        out = np.zeros(6, dtype=np.float32)
        if self._count > p.n + p.m:
            window = np.array(self._history)  # (n + m, 6, 2)
            recent = window[p.m:].mean(axis=0)
            baseline = window[:p.m].mean(axis=0)
            for i in range(6):
                out[i] = _gated_angle_diff(recent[i], baseline[i], p)
        return CellFeatureVector(means.frame, out, "of")


def _gated_angle_diff(recent_uv: np.ndarray, baseline_uv: np.ndarray,
                      p: OfParams) -> float:
    # No motion evidence -> no event evidence.
    if recent_uv[0] == 0.0 and recent_uv[1] == 0.0:
        return 0.0
    theta_r = flow_angle(recent_uv[0], recent_uv[1])
    theta_b = flow_angle(baseline_uv[0], baseline_uv[1])
    d = circular_diff(theta_r, theta_b)
    if d <= p.delta:
        return 0.0
    direction_ok = min(circular_diff(theta_r, p.alpha),
                       circular_diff(theta_r, -p.alpha)) <= p.theta
    return d if direction_ok else 0.0


def of_features(history: list[CellMeans],
                params: OfParams | None = None) -> list[CellFeatureVector]:
    """Batch wrapper over the streaming extractor."""
    extractor = OfFeatureExtractor(params)
    return [extractor.push(cm) for cm in history]


def saliency_features(stream: list[CellMeans],
                      params: SaliencyParams | None = None) -> list[CellFeatureVector]:
    """Keep only the strongest cell at or above gamma; zeros elsewhere.

    Ties break toward the lowest cell index, so at most one component of
    every output vector is nonzero.
    """
    p = params or SaliencyParams()
    out: list[CellFeatureVector] = []
    last_frame: int | None = None
    for cm in stream:
        if last_frame is not None and cm.frame <= last_frame:
            raise UnorderedInput(f"frame {cm.frame} after frame {last_frame}")
        last_frame = cm.frame
        vals = np.asarray(cm.values, dtype=np.float64)
        vec = np.zeros(6, dtype=np.float32)
        eligible = vals >= p.gamma
        if eligible.any():
            masked = np.where(eligible, vals, -np.inf)
            best = int(np.argmax(masked))  # argmax takes the first maximum
            vec[best] = vals[best]
        out.append(CellFeatureVector(cm.frame, vec, "cnn"))
    return out


def _fmt(v: np.float32) -> str:
    return np.format_float_positional(np.float32(v), unique=True, trim="-")


def write_features_csv(stream: list[CellFeatureVector], path: Path | str,
                       variant: str | None = None) -> None:
    """Serialize features; values are float32 printed with full round-trip
    precision so staged runs match in-memory runs bit for bit."""
    if variant is None:
        variant = stream[0].variant if stream else "of"
    lines = [f"# variant={variant}", "frame,f1,f2,f3,f4,f5,f6"]
    for fv in stream:
        lines.append(f"{fv.frame}," + ",".join(_fmt(v) for v in fv.values))
    Path(path).write_text("\n".join(lines) + "\n")


def read_features_csv(path: Path | str) -> tuple[list[CellFeatureVector], str]:
    path = Path(path)
    variant = "of"
    out: list[CellFeatureVector] = []
    header_seen = False
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("variant="):
                variant = body.split("=", 1)[1]
            continue
        if not header_seen:
            if line != "frame,f1,f2,f3,f4,f5,f6":
                raise ParseError(f"{path} row {lineno}: bad header")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 7:
            raise ParseError(f"{path} row {lineno}: expected 7 fields")
        try:
            frame = int(parts[0])
            values = np.array([np.float32(p) for p in parts[1:]], dtype=np.float32)
        except ValueError as exc:
            raise ParseError(f"{path} row {lineno}: bad number") from exc
        out.append(CellFeatureVector(frame, values, variant))
    return out, variant
