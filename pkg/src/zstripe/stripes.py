"""Stripe-plot emission: the (frame, code) scatter that makes events visible.

The SVG output is a static artifact: one mark per nonzero code, optional
overlay dots where cells are active, linear axes with a handful of ticks.
CSV output emits the same points as rows.
"""

from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path

from .errors import ParseError
from .events import FrameActivation, read_activations_csv
from .zorder import read_morton_csv

_WIDTH, _HEIGHT = 880, 440
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 20, 20, 50
_CELL_COLORS = ("#1f77b4", "#2ca02c", "#17becf", "#ff7f0e", "#d62728", "#9467bd")


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def emit_stripes(morton_csv: Path | str, out: Path | str, fmt: str = "svg",
                 activations_csv: Path | str | None = None,
                 timestamp: bool = True) -> Path:
    """Render a Morton stream as an SVG scatter or a points CSV.

    Overlay dots mark frames with active cells, colored by the strongest
    cell, tracing the spatiotemporal trend of an event through the plot.
    """
    records, _, variant = read_morton_csv(morton_csv)
    marks = [(r.frame, r.code) for r in records if r.code != 0]
    overlay: dict[int, int] = {}
    if activations_csv is not None:
        for fa in read_activations_csv(activations_csv):
            if fa.active_cells:
                strongest = int(fa.values.argmax()) + 1
                overlay[fa.frame] = strongest
    out = Path(out)
    if fmt == "csv":
        lines = ["frame,code,cell"]
        for frame, code in marks:
            lines.append(f"{frame},{code},{overlay.get(frame, '')}")
        out.write_text("\n".join(lines) + "\n")
        return out
    if fmt != "svg":
        raise ParseError(f"unknown stripes format {fmt!r}")

    frames = [r.frame for r in records]
    f_lo, f_hi = (min(frames), max(frames)) if frames else (0, 1)
    if f_hi == f_lo:
        f_hi = f_lo + 1
    c_hi = max((code for _, code in marks), default=1)

    def sx(frame: float) -> float:
        span = _WIDTH - _MARGIN_L - _MARGIN_R
        return _MARGIN_L + (frame - f_lo) / (f_hi - f_lo) * span

    def sy(code: float) -> float:
        span = _HEIGHT - _MARGIN_T - _MARGIN_B
        return _HEIGHT - _MARGIN_B - code / c_hi * span

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
    ]
    if timestamp:
        now = datetime.now(timezone.utc).isoformat()
        parts.append(f"<!-- generated {now} -->")
    parts.append(f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>')
    x0, y0 = _MARGIN_L, _HEIGHT - _MARGIN_B
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{_WIDTH - _MARGIN_R}" y2="{y0}" '
                 'stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{_MARGIN_T}" '
                 'stroke="black"/>')
    for tick in _ticks(f_lo, f_hi):
        parts.append(f'<text x="{sx(tick):.1f}" y="{y0 + 18}" font-size="11" '
                     f'text-anchor="middle">{tick:.0f}</text>')
    for tick in _ticks(0, c_hi):
        parts.append(f'<text x="{x0 - 6}" y="{sy(tick) + 4:.1f}" font-size="11" '
                     f'text-anchor="end">{tick:.3g}</text>')
    parts.append(f'<text x="{(_WIDTH) // 2}" y="{_HEIGHT - 12}" font-size="12" '
                 'text-anchor="middle">frame</text>')
    parts.append(f'<text x="16" y="{_HEIGHT // 2}" font-size="12" '
                 f'text-anchor="middle" transform="rotate(-90 16 {_HEIGHT // 2})">'
                 f'morton code ({variant})</text>')
    for frame, code in marks:
        parts.append(f'<rect class="mark" x="{sx(frame) - 1.2:.1f}" '
                     f'y="{sy(code) - 1.2:.1f}" width="2.4" height="2.4" '
                     'fill="#333333"/>')
    code_by_frame = dict(marks)
    for frame, cell in sorted(overlay.items()):
        code = code_by_frame.get(frame)
        if code is None:
            continue
        parts.append(f'<circle class="overlay" cx="{sx(frame):.1f}" '
                     f'cy="{sy(code):.1f}" r="3.2" fill="none" '
                     f'stroke="{_CELL_COLORS[cell - 1]}" stroke-width="1.4"/>')
    parts.append("</svg>")
    out.write_text("\n".join(parts) + "\n")
    return out
