"""Event identification from single-dimensional Morton streams.

Codes decode back to per-cell activations; a crossing is confirmed when at
least ``min_distinct_cells`` cells activate sequentially, with at least one
cell on each side of the center gap and no jump between successive cells
exceeding ``max_cell_jump``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, UnorderedInput
from .grid import LEFT_CELLS, RIGHT_CELLS
from .zorder import MortonRecord, Quantizer, morton_decode

DIRECTION_LTR = "left_to_right"
DIRECTION_RTL = "right_to_left"
DIRECTION_UNKNOWN = "unknown"


@dataclass(frozen=True)
class DetectParams:
    min_distinct_cells: int = 3
    require_both_sides: bool = True
    max_cell_jump: int = 2
    gap_tolerance: int = 10
    min_event_frames: int = 5

    def __post_init__(self) -> None:
        if self.min_distinct_cells < 2:
            raise ValueError("min_distinct_cells must be >= 2")
        if self.max_cell_jump < 1:
            raise ValueError("max_cell_jump must be >= 1")
        if self.gap_tolerance < 0:
            raise ValueError("gap_tolerance must be >= 0")
        if self.min_event_frames < 1:
            raise ValueError("min_event_frames must be >= 1")


@dataclass(frozen=True)
class EventWindow:
    """Inclusive frame interval of one detected event."""

    start_frame: int
    end_frame: int
    variant: str
    direction: str
    peak_value: float

    @property
    def length(self) -> int:
        return self.end_frame - self.start_frame + 1


@dataclass(frozen=True)
class FrameActivation:
    """Dequantized per-cell magnitudes for one frame; cell i is active iff
    values[i - 1] > 0."""

    frame: int
    values: np.ndarray

    @property
    def active_cells(self) -> set[int]:
        return {i + 1 for i in range(len(self.values)) if self.values[i] > 0}


def activations_from_codes(stream: list[MortonRecord],
                           quantizer: Quantizer) -> list[FrameActivation]:
    """Decode Morton codes into per-frame cell magnitudes.

    Upstream gating zeroes non-events, so a nonzero decoded coordinate is
    exactly an activation.
    """
    out: list[FrameActivation] = []
    last = None
    for rec in stream:
        if last is not None and rec.frame <= last:
            raise UnorderedInput(f"frame {rec.frame} after frame {last}")
        last = rec.frame
        coords = morton_decode(rec.code, quantizer.dims, quantizer.bits_per_dim)
        values = np.array(
            [quantizer.dequantize(c, d) if c else 0.0 for d, c in enumerate(coords)],
            dtype=np.float64,
        )
        out.append(FrameActivation(rec.frame, values))
    return out


def _strongest_cell(values: np.ndarray) -> int:
    """1-based index of the largest magnitude; lowest index on ties."""
    return int(np.argmax(values)) + 1


def _segment_runs(active: list[FrameActivation], gap_tolerance: int
                  ) -> list[list[FrameActivation]]:
    runs: list[list[FrameActivation]] = []
    for fa in active:
        if runs and fa.frame - runs[-1][-1].frame - 1 <= gap_tolerance:
            runs[-1].append(fa)
        else:
            runs.append([fa])
    return runs


def detect_events(activations: list[FrameActivation],
                  params: DetectParams | None = None,
                  variant: str = "of") -> list[EventWindow]:
    """Confirm event windows from an ordered activation stream.

    Frames with multiple active cells collapse to the strongest cell; a
    cell held active over consecutive frames counts once in the distinct
    sequence, and revisiting it later re-enters the sequence.
    """
    p = params or DetectParams()
    last = None
    for fa in activations:
        if last is not None and fa.frame <= last:
            raise UnorderedInput(f"frame {fa.frame} after frame {last}")
        last = fa.frame
    active = [fa for fa in activations if fa.active_cells]
    events: list[EventWindow] = []
    for run in _segment_runs(active, p.gap_tolerance):
        sequence: list[int] = []
        for fa in run:
            cell = _strongest_cell(fa.values)
            if not sequence or sequence[-1] != cell:
                sequence.append(cell)
        start, end = run[0].frame, run[-1].frame
        if len(sequence) < p.min_distinct_cells:
            continue
        if p.require_both_sides:
            present = set(sequence)
            if not (present & LEFT_CELLS and present & RIGHT_CELLS):
                continue
        if any(abs(b - a) > p.max_cell_jump for a, b in zip(sequence, sequence[1:])):
            continue
        if end - start + 1 < p.min_event_frames:
            continue
        if sequence[0] < sequence[-1]:
            direction = DIRECTION_LTR
        elif sequence[0] > sequence[-1]:
            direction = DIRECTION_RTL
        else:
            direction = DIRECTION_UNKNOWN
        peak = max(float(fa.values.max()) for fa in run)
        events.append(EventWindow(start, end, variant, direction, peak))
    return events


def write_events_csv(events: list[EventWindow], path: Path | str,
                     scenario_id: str = "scenario") -> None:
    lines = ["scenario_id,start_frame,end_frame,variant,direction,peak_value"]
    for ev in events:
        peak = np.format_float_positional(np.float32(ev.peak_value), unique=True, trim="-")
        lines.append(f"{scenario_id},{ev.start_frame},{ev.end_frame},"
                     f"{ev.variant},{ev.direction},{peak}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_events_csv(path: Path | str) -> dict[str, list[EventWindow]]:
    path = Path(path)
    out: dict[str, list[EventWindow]] = {}
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        return out
    if lines[0] != "scenario_id,start_frame,end_frame,variant,direction,peak_value":
        raise ParseError(f"{path} row 1: bad header")
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 6:
            raise ParseError(f"{path} row {lineno}: expected 6 fields")
        try:
            ev = EventWindow(int(parts[1]), int(parts[2]), parts[3], parts[4],
                             float(parts[5]))
        except ValueError as exc:
            raise ParseError(f"{path} row {lineno}: bad field") from exc
        out.setdefault(parts[0], []).append(ev)
    return out


def write_activations_csv(activations: list[FrameActivation], path: Path | str) -> None:
    """Optional artifact consumed by the stripe-plot overlay."""
    lines = ["frame,cell,value"]
    for fa in activations:
        for i, v in enumerate(fa.values):
            if v > 0:
                val = np.format_float_positional(np.float32(v), unique=True, trim="-")
                lines.append(f"{fa.frame},{i + 1},{val}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_activations_csv(path: Path | str) -> list[FrameActivation]:
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != "frame,cell,value":
        raise ParseError(f"{path} row 1: expected 'frame,cell,value' header")
    by_frame: dict[int, np.ndarray] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError(f"{path} row {lineno}: expected 3 fields")
        try:
            frame, cell, value = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise ParseError(f"{path} row {lineno}: bad field") from exc
        if not 1 <= cell <= 6:
            raise ParseError(f"{path} row {lineno}: cell {cell} out of range")
        by_frame.setdefault(frame, np.zeros(6))[cell - 1] = value
    return [FrameActivation(f, by_frame[f]) for f in sorted(by_frame)]
