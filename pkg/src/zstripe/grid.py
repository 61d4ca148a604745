"""Region-of-interest grid and per-cell aggregation.

The RoI is a central band of the frame split into 6 cells, 3 left and 3
right of an excluded center gap (the focus-of-expansion region). Cells are
indexed 1..6 left to right so the cell index is monotone in horizontal
position, which the event detector's jump rule relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateCell, GeometryMismatch, ParseError

DEFAULT_ROI = (0.15, 0.35, 0.85, 0.75)
DEFAULT_GAP = (0.45, 0.55)

LEFT_CELLS = frozenset({1, 2, 3})
RIGHT_CELLS = frozenset({4, 5, 6})


@dataclass(frozen=True)
class PixelRect:
    """Half-open pixel rectangle [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def area(self) -> int:
        return max(0, self.x1 - self.x0) * max(0, self.y1 - self.y0)


@dataclass(frozen=True)
class RoiGrid:
    """Rasterized 6-cell grid for one frame geometry."""

    frame_width: int
    frame_height: int
    roi: tuple[float, float, float, float]
    gap: tuple[float, float]
    cells: tuple[PixelRect, ...]

    @property
    def x_max(self) -> int:
        return max(c.x1 for c in self.cells)

    @property
    def y_max(self) -> int:
        return max(c.y1 for c in self.cells)


def make_grid(frame_width: int, frame_height: int,
              roi_fractions: tuple[float, float, float, float] = DEFAULT_ROI,
              gap_fractions: tuple[float, float] = DEFAULT_GAP) -> RoiGrid:
    """Rasterize fractional RoI coordinates to the 6-cell pixel grid.

    Low edges floor, high edges ceil, so grids are bit-reproducible. Each
    side block is then partitioned into 3 integer columns of near-equal
    width (exactly equal when divisible by 3).
    """
    x0, y0, x1, y1 = roi_fractions
    gx0, gx1 = gap_fractions
    ordered = 0.0 <= x0 < gx0 < gx1 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0
    if not ordered:
        raise DegenerateCell(
            f"roi {roi_fractions} / gap {gap_fractions} violate x0 < gx0 < gx1 < x1, y0 < y1"
        )
    py0 = math.floor(y0 * frame_height)
    py1 = math.ceil(y1 * frame_height)
    cells: list[PixelRect] = []
    for lo_frac, hi_frac in ((x0, gx0), (gx1, x1)):
        lo = math.floor(lo_frac * frame_width)
        hi = math.ceil(hi_frac * frame_width)
        block = hi - lo
        bounds = [lo + round(k * block / 3) for k in range(4)]
        for k in range(3):
            cells.append(PixelRect(bounds[k], py0, bounds[k + 1], py1))
    for idx, cell in enumerate(cells, start=1):
        if cell.area < 1:
            raise DegenerateCell(f"cell {idx} rasterizes to zero area: {cell}")
    return RoiGrid(frame_width, frame_height, tuple(roi_fractions),
                   tuple(gap_fractions), tuple(cells))


@dataclass(frozen=True)
class CellMeans:
    """Per-frame cell aggregates: (6, 2) mean flow or (6,) mean saliency."""

    frame: int
    values: np.ndarray

    @property
    def is_flow(self) -> bool:
        return self.values.ndim == 2


def cell_mean_flow(flow_uv: np.ndarray, grid: RoiGrid, frame: int = 0) -> CellMeans:
    """Arithmetic mean of (u, v) over each cell of an (H, W, 2) flow field."""
    h, w = flow_uv.shape[:2]
    if h < grid.y_max or w < grid.x_max:
        raise GeometryMismatch(f"flow {w}x{h} smaller than grid extents "
                               f"{grid.x_max}x{grid.y_max}")
    means = np.empty((6, 2), dtype=np.float64)
    for i, c in enumerate(grid.cells):
        means[i] = flow_uv[c.y0:c.y1, c.x0:c.x1].reshape(-1, 2).mean(axis=0)
    return CellMeans(frame, means)


def cell_mean_saliency(sal_frame: np.ndarray, grid: RoiGrid, frame: int = 0) -> CellMeans:
    """Mean saliency over each cell of a single (H, W) saliency map."""
    h, w = sal_frame.shape[:2]
    if h < grid.y_max or w < grid.x_max:
        raise GeometryMismatch(f"saliency {w}x{h} smaller than grid extents "
                               f"{grid.x_max}x{grid.y_max}")
    means = np.empty(6, dtype=np.float64)
    for i, c in enumerate(grid.cells):
        means[i] = sal_frame[c.y0:c.y1, c.x0:c.x1].mean()
    return CellMeans(frame, means)


def write_cell_means_csv(stream: list[CellMeans], path: Path | str) -> None:
    if stream and stream[0].is_flow:
        header = "frame," + ",".join(f"c{i}u,c{i}v" for i in range(1, 7))
    else:
        header = "frame," + ",".join(f"c{i}" for i in range(1, 7))
    lines = [header]
    for cm in stream:
        flat = cm.values.reshape(-1)
        lines.append(f"{cm.frame}," + ",".join(repr(float(v)) for v in flat))
    Path(path).write_text("\n".join(lines) + "\n")


def read_cell_means_csv(path: Path | str) -> list[CellMeans]:
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        return []
    is_flow = lines[0].startswith("frame,c1u")
    out: list[CellMeans] = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        want = 13 if is_flow else 7
        if len(parts) != want:
            raise ParseError(f"{path} row {lineno}: expected {want} fields")
        try:
            frame = int(parts[0])
            vals = np.array([float(p) for p in parts[1:]], dtype=np.float64)
        except ValueError as exc:
            raise ParseError(f"{path} row {lineno}: bad number") from exc
        out.append(CellMeans(frame, vals.reshape(6, 2) if is_flow else vals))
    return out
