"""Quantization and Z-order (Morton) transforms for 6-component features.

Bit convention: bit j of dimension d (0-based, cell 1 = dimension 0) maps
to output bit ``j * dims + d``, so the all-zero vector encodes to 0 and the
code is strictly monotone in every single coordinate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CodeOverflow, CoordOverflow, ParseError

OF_RANGE = (0.0, 180.0)
SALIENCY_RANGE = (0.0, 1.0)


@dataclass(frozen=True)
class Quantizer:
    """Per-dimension linear quantizer feeding the Morton transform."""

    ranges: tuple[tuple[float, float], ...]
    bits_per_dim: int = 8

    def __post_init__(self) -> None:
        if self.bits_per_dim < 1:
            raise ValueError("bits_per_dim must be >= 1")
        if self.bits_per_dim * self.dims > 64:
            raise ValueError("bits_per_dim * dims must not exceed 64")
        for lo, hi in self.ranges:
            if not lo < hi:
                raise ValueError(f"range [{lo}, {hi}] must have lo < hi")

    @property
    def dims(self) -> int:
        return len(self.ranges)

    @property
    def levels(self) -> int:
        return (1 << self.bits_per_dim) - 1

    @classmethod
    def for_variant(cls, variant: str, bits_per_dim: int = 8, dims: int = 6) -> "Quantizer":
        rng = OF_RANGE if variant == "of" else SALIENCY_RANGE
        return cls(ranges=(rng,) * dims, bits_per_dim=bits_per_dim)

    def quantize_vector(self, values: np.ndarray) -> tuple[int, ...]:
        return tuple(
            quantize(float(v), rng, self.bits_per_dim)
            for v, rng in zip(values, self.ranges)
        )

    def dequantize(self, coord: int, dim: int) -> float:
        lo, hi = self.ranges[dim]
        return lo + coord * (hi - lo) / self.levels


def quantize(value: float, dim_range: tuple[float, float], bits: int) -> int:
    """Map a real value to [0, 2^bits - 1], rounding half away from zero.

    Out-of-range values clamp; upstream gating already bounds features, so
    clamping only guards float round-off at the range endpoints.
    """
    lo, hi = dim_range
    clamped = min(max(float(value), lo), hi)
    scaled = (clamped - lo) / (hi - lo) * ((1 << bits) - 1)
    return int(math.floor(scaled + 0.5))


def morton_encode(coords: tuple[int, ...] | list[int], bits: int) -> int:
    """Interleave coordinate bits into a single Morton code."""
    dims = len(coords)
    limit = 1 << bits
    code = 0
    for d, coord in enumerate(coords):
        c = int(coord)
        if c < 0 or c >= limit:
            raise CoordOverflow(f"coordinate {c} does not fit in {bits} bits")
        for j in range(bits):
            code |= ((c >> j) & 1) << (j * dims + d)
    return code


def morton_decode(code: int, dims: int, bits: int) -> tuple[int, ...]:
    """Exact inverse of morton_encode."""
    code = int(code)
    if code < 0 or code >= 1 << (bits * dims):
        raise CodeOverflow(f"code {code} does not fit in {bits * dims} bits")
    coords = [0] * dims
    for j in range(bits):
        for d in range(dims):
            coords[d] |= ((code >> (j * dims + d)) & 1) << j
    return tuple(coords)


def morton_encode_batch(coords: np.ndarray, bits: int) -> np.ndarray:
    """Vectorized morton_encode over rows of an (N, dims) integer array."""
    coords = np.asarray(coords, dtype=np.uint64)
    dims = coords.shape[1]
    if coords.size and int(coords.max()) >= 1 << bits:
        raise CoordOverflow(f"coordinate {int(coords.max())} does not fit in {bits} bits")
    codes = np.zeros(coords.shape[0], dtype=np.uint64)
    for j in range(bits):
        for d in range(dims):
            codes |= ((coords[:, d] >> np.uint64(j)) & np.uint64(1)) << np.uint64(j * dims + d)
    return codes


def morton_decode_batch(codes: np.ndarray, dims: int, bits: int) -> np.ndarray:
    """Vectorized morton_decode; returns an (N, dims) uint64 array."""
    codes = np.asarray(codes, dtype=np.uint64)
    if codes.size and int(codes.max()) >= 1 << (bits * dims):
        raise CodeOverflow(f"code {int(codes.max())} does not fit in {bits * dims} bits")
    coords = np.zeros((codes.shape[0], dims), dtype=np.uint64)
    for j in range(bits):
        for d in range(dims):
            coords[:, d] |= ((codes >> np.uint64(j * dims + d)) & np.uint64(1)) << np.uint64(j)
    return coords


@dataclass(frozen=True)
class MortonRecord:
    """Frame index plus the Z-order code of its quantized feature vector."""

    frame: int
    code: int


def encode_features(frames: list[int], vectors: np.ndarray,
                    quantizer: Quantizer) -> list[MortonRecord]:
    """Quantize per-frame feature vectors and Morton-encode them."""
    if len(frames) == 0:
        return []
    coords = np.empty((len(frames), quantizer.dims), dtype=np.uint64)
    arr = np.asarray(vectors, dtype=np.float64)
    for d, (lo, hi) in enumerate(quantizer.ranges):
        clamped = np.clip(arr[:, d], lo, hi)
        scaled = (clamped - lo) / (hi - lo) * quantizer.levels
        coords[:, d] = np.floor(scaled + 0.5).astype(np.uint64)
    codes = morton_encode_batch(coords, quantizer.bits_per_dim)
    return [MortonRecord(f, int(c)) for f, c in zip(frames, codes)]


def write_morton_csv(records: list[MortonRecord], quantizer: Quantizer,
                     variant: str, path: Path | str) -> None:
    """Serialize a Morton stream; header comments make decoding self-describing."""
    ranges = ",".join(f"{lo:g}:{hi:g}" for lo, hi in quantizer.ranges)
    lines = [
        f"# variant={variant}",
        f"# dims={quantizer.dims} bits={quantizer.bits_per_dim} ranges={ranges}",
        "frame,code",
    ]
    for rec in records:
        lines.append(f"{rec.frame},{rec.code}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_morton_csv(path: Path | str) -> tuple[list[MortonRecord], Quantizer, str]:
    path = Path(path)
    records: list[MortonRecord] = []
    variant = "of"
    dims, bits = 6, 8
    ranges: tuple[tuple[float, float], ...] | None = None
    header_seen = False
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("variant="):
                variant = body.split("=", 1)[1]
            elif body.startswith("dims="):
                try:
                    parts = dict(p.split("=", 1) for p in body.split())
                    dims = int(parts["dims"])
                    bits = int(parts["bits"])
                    ranges = tuple(
                        (float(r.split(":")[0]), float(r.split(":")[1]))
                        for r in parts["ranges"].split(",")
                    )
                except (KeyError, ValueError, IndexError) as exc:
                    raise ParseError(f"{path} row {lineno}: bad quantizer header") from exc
            continue
        if not header_seen:
            if line != "frame,code":
                raise ParseError(f"{path} row {lineno}: expected 'frame,code' header")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"{path} row {lineno}: expected 'frame,code'")
        try:
            records.append(MortonRecord(int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise ParseError(f"{path} row {lineno}: non-integer field") from exc
    if ranges is None:
        ranges = ((OF_RANGE if variant == "of" else SALIENCY_RANGE),) * dims
    quantizer = Quantizer(ranges=ranges, bits_per_dim=bits)
    return records, quantizer, variant
