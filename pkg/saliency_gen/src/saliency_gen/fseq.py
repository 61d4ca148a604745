"""Standalone FSEQ container I/O.

This package talks to the event-retrieval pipeline only through its file
format, so the layout is implemented here against the published byte
contract: little-endian magic "FSQ1", u32 width/height/frame_count/
channel_type (0 = u8 gray, 1 = f32 gray/saliency, 2 = f32 flow pair),
f32 frame_rate, then row-major frames.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"FSQ1"
HEADER = struct.Struct("<4sIIIIf")

CHANNEL_U8_GRAY = 0
CHANNEL_F32_GRAY = 1


class FseqError(Exception):
    """Malformed or unsupported FSEQ input."""


def read_gray_fseq(path: Path | str) -> tuple[np.ndarray, float]:
    """Read a channel-0 or channel-1 file as float32 frames in [0, 1]."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise FseqError(f"{path} is not an FSEQ file")
    if len(raw) < HEADER.size:
        raise FseqError(f"{path}: truncated header")
    _, width, height, count, ctype, rate = HEADER.unpack_from(raw)
    if width == 0 or height == 0:
        raise FseqError(f"{path}: zero geometry")
    body = raw[HEADER.size:]
    if ctype == CHANNEL_U8_GRAY:
        if len(body) != count * width * height:
            raise FseqError(f"{path}: payload size mismatch")
        frames = np.frombuffer(body, dtype=np.uint8).reshape(count, height, width)
        return frames.astype(np.float32) / np.float32(255.0), rate
    if ctype == CHANNEL_F32_GRAY:
        if len(body) != count * width * height * 4:
            raise FseqError(f"{path}: payload size mismatch")
        frames = np.frombuffer(body, dtype="<f4").reshape(count, height, width)
        return frames.copy(), rate
    raise FseqError(f"{path}: channel_type {ctype} is not a grayscale payload")


def write_saliency_fseq(frames: np.ndarray, path: Path | str,
                        frame_rate: float = 10.0) -> None:
    """Atomically write a channel-1 saliency sequence (write temp, rename)."""
    frames = np.ascontiguousarray(frames, dtype="<f4")
    count, height, width = frames.shape
    path = Path(path)
    header = HEADER.pack(MAGIC, width, height, count, CHANNEL_F32_GRAY,
                         float(frame_rate))
    fd, tmp_name = tempfile.mkstemp(dir=path.parent or Path("."),
                                    prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(frames.tobytes())
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
