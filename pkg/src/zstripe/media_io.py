"""Readers and writers for every on-disk artifact.

All sequence payloads live in one container format (FSEQ) so a single
bit-exact parser covers camera frames, saliency maps, and flow fields.

FSEQ layout, little-endian throughout:

    magic   "FSQ1"  (4 ASCII bytes)
    width   u32
    height  u32
    frame_count u32
    channel_type u32   0 = u8 gray, 1 = f32 gray/saliency, 2 = f32 flow pair
    frame_rate  f32    frames per second
    payload            frames row-major, top-left origin; flow stores u then
                       v per pixel; f32 is IEEE-754 binary32

8-bit payloads scale to [0, 1] on read by division by 255.
"""

from __future__ import annotations

import csv
import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    GeometryMismatch,
    InvalidHeader,
    IoFailure,
    MagicMismatch,
    MissingIndex,
    ParseError,
    TruncatedPayload,
    UnsupportedPgm,
)

FSEQ_MAGIC = b"FSQ1"
FSEQ_HEADER = struct.Struct("<4sIIIIf")

CHANNEL_U8_GRAY = 0
CHANNEL_F32_GRAY = 1
CHANNEL_F32_FLOW = 2

DEFAULT_FRAME_RATE = 10.0

_PGM_NAME = re.compile(r"^frame_(\d{6})\.pgm$")


@dataclass
class FrameSequence:
    """Ordered grayscale frames with geometry metadata.

    ``frames`` is a float32 array of shape (N, height, width) with every
    intensity in [0, 1]; indices are contiguous from 0.
    """

    width: int
    height: int
    frames: np.ndarray
    frame_rate: float = DEFAULT_FRAME_RATE

    def __post_init__(self) -> None:
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim == 2:
            self.frames = self.frames[None, :, :]
        if self.frames.size == 0:
            self.frames = self.frames.reshape(0, self.height, self.width)
        self.validate()

    def validate(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise InvalidHeader(f"nonpositive geometry {self.width}x{self.height}")
        if self.frame_rate <= 0 or not np.isfinite(self.frame_rate):
            raise InvalidHeader(f"invalid frame rate {self.frame_rate}")
        if self.frames.shape[1:] != (self.height, self.width):
            raise GeometryMismatch(
                f"frames are {self.frames.shape[1:]}, header says "
                f"({self.height}, {self.width})"
            )
        if self.frames.size and (self.frames.min() < 0.0 or self.frames.max() > 1.0):
            raise ValueError("pixel intensities must lie in [0, 1]")

    def __len__(self) -> int:
        return self.frames.shape[0]


class SaliencySequence(FrameSequence):
    """Per-pixel saliency intensities in [0, 1]; geometry as FrameSequence."""


@dataclass
class FlowSequence:
    """Stack of dense flow fields, shape (N, height, width, 2) as (u, v)."""

    width: int
    height: int
    fields: np.ndarray
    frame_rate: float = DEFAULT_FRAME_RATE

    def __post_init__(self) -> None:
        self.fields = np.asarray(self.fields, dtype=np.float32)
        if self.fields.size == 0:
            self.fields = self.fields.reshape(0, self.height, self.width, 2)
        if self.width <= 0 or self.height <= 0:
            raise InvalidHeader(f"nonpositive geometry {self.width}x{self.height}")
        if self.fields.shape[1:] != (self.height, self.width, 2):
            raise GeometryMismatch(
                f"flow fields are {self.fields.shape[1:]}, expected "
                f"({self.height}, {self.width}, 2)"
            )
        # NaN propagates through min, +/-inf survives into min or max, so two
        # temp-free scans decide finiteness of arbitrarily large stacks.
        if self.fields.size and not (np.isfinite(self.fields.min())
                                     and np.isfinite(self.fields.max())):
            raise ValueError("flow fields must be finite")

    def __len__(self) -> int:
        return self.fields.shape[0]


@dataclass(frozen=True)
class GroundTruthEvent:
    """One annotated scenario: a crossing window or an explicit non-event."""

    scenario_id: str
    start_frame: int
    end_frame: int
    label: str

    @property
    def is_positive(self) -> bool:
        return self.label != "none"

    def validate(self) -> None:
        if self.is_positive:
            if not (0 <= self.start_frame <= self.end_frame):
                raise ValueError(
                    f"{self.scenario_id}: need 0 <= start <= end, got "
                    f"[{self.start_frame}, {self.end_frame}]"
                )
        elif self.start_frame != -1 or self.end_frame != -1:
            raise ValueError(f"{self.scenario_id}: 'none' rows carry start=end=-1")


def write_fseq(seq: FrameSequence | FlowSequence, path: Path | str,
               channel_type: int | None = None) -> None:
    """Serialize a sequence to the FSEQ container.

    ``channel_type`` defaults per payload: flow -> 2, saliency -> 1,
    frames -> 0 (8-bit). Round trip is exact for u8 payloads and bit-exact
    for f32 payloads.
    """
    path = Path(path)
    if isinstance(seq, FlowSequence):
        ctype = CHANNEL_F32_FLOW
        if channel_type not in (None, CHANNEL_F32_FLOW):
            raise InvalidHeader("flow sequences must use channel_type 2")
        payload = np.ascontiguousarray(seq.fields, dtype="<f4").tobytes()
        count = len(seq)
    else:
        if channel_type is None:
            ctype = CHANNEL_F32_GRAY if isinstance(seq, SaliencySequence) else CHANNEL_U8_GRAY
        else:
            ctype = channel_type
        count = len(seq)
        if ctype == CHANNEL_U8_GRAY:
            quantized = np.rint(np.clip(seq.frames, 0.0, 1.0) * 255.0).astype(np.uint8)
            payload = quantized.tobytes()
        elif ctype == CHANNEL_F32_GRAY:
            payload = np.ascontiguousarray(seq.frames, dtype="<f4").tobytes()
        else:
            raise InvalidHeader(f"unknown channel_type {ctype}")
    header = FSEQ_HEADER.pack(FSEQ_MAGIC, seq.width, seq.height, count,
                              ctype, float(seq.frame_rate))
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_fseq(path: Path | str) -> FrameSequence | SaliencySequence | FlowSequence:
    """Decode an FSEQ file; the channel_type selects the payload kind."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(raw) < 4 or raw[:4] != FSEQ_MAGIC:
        raise MagicMismatch(f"{path} is not an FSEQ file")
    if len(raw) < FSEQ_HEADER.size:
        raise TruncatedPayload(f"{path}: header truncated at {len(raw)} bytes")
    _, width, height, count, ctype, rate = FSEQ_HEADER.unpack_from(raw)
    if width == 0 or height == 0:
        raise InvalidHeader(f"{path}: zero width/height")
    if not np.isfinite(rate) or rate <= 0:
        rate = DEFAULT_FRAME_RATE
    body = raw[FSEQ_HEADER.size:]
    pixels = width * height
    if ctype == CHANNEL_U8_GRAY:
        expected = count * pixels
    elif ctype == CHANNEL_F32_GRAY:
        expected = count * pixels * 4
    elif ctype == CHANNEL_F32_FLOW:
        expected = count * pixels * 8
    else:
        raise InvalidHeader(f"{path}: unknown channel_type {ctype}")
    if len(body) != expected:
        raise TruncatedPayload(
            f"{path}: payload holds {len(body)} bytes, header implies {expected}"
        )
    if ctype == CHANNEL_U8_GRAY:
        data = np.frombuffer(body, dtype=np.uint8).reshape(count, height, width)
        frames = data.astype(np.float32) / np.float32(255.0)
        return FrameSequence(width, height, frames, rate)
    if ctype == CHANNEL_F32_GRAY:
        frames = np.frombuffer(body, dtype="<f4").reshape(count, height, width)
        return SaliencySequence(width, height, frames.copy(), rate)
    fields = np.frombuffer(body, dtype="<f4").reshape(count, height, width, 2)
    return FlowSequence(width, height, fields.copy(), rate)


def _read_pgm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if data[:2] == b"P2":
        raise UnsupportedPgm(f"{path}: ASCII P2 is not supported")
    if data[:2] != b"P5":
        raise UnsupportedPgm(f"{path}: not a binary PGM")
    # Header tokens: width, height, maxval; '#' starts a comment to EOL.
    pos = 2
    tokens: list[int] = []
    while len(tokens) < 3:
        while pos < len(data) and data[pos] in b" \t\r\n":
            pos += 1
        if pos < len(data) and data[pos] == ord("#"):
            while pos < len(data) and data[pos] != ord("\n"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos] not in b" \t\r\n":
            pos += 1
        if start == pos:
            raise UnsupportedPgm(f"{path}: truncated header")
        tokens.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = tokens
    if maxval != 255:
        raise UnsupportedPgm(f"{path}: maxval {maxval} != 255")
    body = data[pos:pos + width * height]
    if len(body) != width * height:
        raise TruncatedPayload(f"{path}: expected {width * height} pixel bytes")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width)


def read_pgm_sequence(directory: Path | str,
                      frame_rate: float = DEFAULT_FRAME_RATE) -> FrameSequence:
    """Load frame_%06d.pgm files as one sequence, scaled to [0, 1]."""
    directory = Path(directory)
    indexed: dict[int, Path] = {}
    try:
        entries = list(directory.iterdir())
    except OSError as exc:
        raise IoFailure(f"cannot list {directory}: {exc}") from exc
    for entry in entries:
        m = _PGM_NAME.match(entry.name)
        if m:
            indexed[int(m.group(1))] = entry
    if not indexed:
        raise MissingIndex(f"{directory}: no frame_%06d.pgm files")
    count = max(indexed) + 1
    for i in range(count):
        if i not in indexed:
            raise MissingIndex(f"{directory}: frame_{i:06d}.pgm is missing")
    frames = []
    shape = None
    for i in range(count):
        img = _read_pgm(indexed[i])
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise GeometryMismatch(
                f"{indexed[i]}: geometry {img.shape} differs from {shape}"
            )
        frames.append(img)
    stack = np.stack(frames).astype(np.float32) / np.float32(255.0)
    return FrameSequence(shape[1], shape[0], stack, frame_rate)


ANNOTATION_HEADER = ["scenario_id", "start_frame", "end_frame", "label"]


def read_annotations(path: Path | str) -> list[GroundTruthEvent]:
    """Parse the ground-truth CSV; rejects rows violating event invariants."""
    path = Path(path)
    events: list[GroundTruthEvent] = []
    seen: set[str] = set()
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ANNOTATION_HEADER:
            raise ParseError(f"{path} row 1: header must be {','.join(ANNOTATION_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(f"{path} row {lineno}: expected 4 fields, got {len(row)}")
            scenario_id, start_s, end_s, label = (f.strip() for f in row)
            try:
                start, end = int(start_s), int(end_s)
            except ValueError as exc:
                raise ParseError(f"{path} row {lineno}: non-integer frame index") from exc
            event = GroundTruthEvent(scenario_id, start, end, label)
            try:
                event.validate()
            except ValueError as exc:
                raise ParseError(f"{path} row {lineno}: {exc}") from exc
            if scenario_id in seen:
                raise ParseError(f"{path} row {lineno}: duplicate scenario {scenario_id}")
            seen.add(scenario_id)
            events.append(event)
    return events


def write_annotations(events: list[GroundTruthEvent], path: Path | str) -> None:
    path = Path(path)
    lines = [",".join(ANNOTATION_HEADER)]
    for ev in events:
        lines.append(f"{ev.scenario_id},{ev.start_frame},{ev.end_frame},{ev.label}")
    path.write_text("\n".join(lines) + "\n")
