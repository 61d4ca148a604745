"""Dense optical flow by polynomial expansion with pyramidal refinement.

Each frame is approximated per pixel by a quadratic model
``f(x) ~ x^T A x + b^T x + c`` fitted by Gaussian-weighted least squares
over a poly_n x poly_n neighborhood. Between two frames the displacement d
satisfies ``A d = db`` where ``db`` is derived from the shift of the linear
coefficients; the solve averages the normal equations over a
winsize x winsize neighborhood and runs coarse to fine over an image
pyramid, warping with the current flow estimate at every iteration.

Coordinates: x is the column axis (u positive rightward), y the row axis
(v positive downward). Borders replicate everywhere, so flow is defined at
every pixel; accuracy claims are restricted to the interior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d, uniform_filter

from .errors import GeometryMismatch
from .media_io import FrameSequence, FlowSequence

try:
    from numba import njit
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

# Textureless-region policy: ridge term added to the averaged normal matrix,
# and the determinant floor below which displacement is forced to zero.
_RIDGE = 1e-6
_DET_FLOOR = 1e-12

_BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0], dtype=np.float32) / np.float32(16.0)


@dataclass(frozen=True)
class FlowParams:
    pyr_scale: float = 0.5
    levels: int = 3
    winsize: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.2

    def __post_init__(self) -> None:
        if not 0.0 < self.pyr_scale < 1.0:
            raise ValueError("pyr_scale must lie in (0, 1)")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.winsize < 3 or self.winsize % 2 == 0:
            raise ValueError("winsize must be odd and >= 3")
        if self.poly_n < 3 or self.poly_n % 2 == 0:
            raise ValueError("poly_n must be odd and >= 3")
        if self.poly_sigma <= 0.0:
            raise ValueError("poly_sigma must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass
class FlowField:
    """Per-pixel displacement (u, v) in pixels, shape (height, width, 2)."""

    width: int
    height: int
    uv: np.ndarray

    def __post_init__(self) -> None:
        self.uv = np.asarray(self.uv, dtype=np.float32)
        if self.uv.shape != (self.height, self.width, 2):
            raise GeometryMismatch(
                f"flow array {self.uv.shape} does not match "
                f"({self.height}, {self.width}, 2)"
            )
        if self.uv.size and not (np.isfinite(self.uv.min())
                                 and np.isfinite(self.uv.max())):
            raise ValueError("flow must be finite everywhere")

    @property
    def u(self) -> np.ndarray:
        return self.uv[..., 0]

    @property
    def v(self) -> np.ndarray:
        return self.uv[..., 1]


@dataclass
class PolyExpansion:
    """Per-pixel quadratic model: symmetric 2x2 ``a``, 2-vector ``b``, scalar ``c``."""

    a: np.ndarray  # (H, W, 2, 2)
    b: np.ndarray  # (H, W, 2)
    c: np.ndarray  # (H, W)


def _gaussian_1d(poly_n: int, sigma: float) -> np.ndarray:
    r = poly_n // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _expansion_kernels(poly_n: int, sigma: float):
    """1D applicability kernels and the inverse Gram entries for the fit."""
    r = poly_n // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = _gaussian_1d(poly_n, sigma)
    s2 = float((g * x * x).sum())
    s4 = float((g * x ** 4).sum())
    s22 = s2 * s2
    gram = np.array([[1.0, s2, s2], [s2, s4, s22], [s2, s22, s4]])
    inv = np.linalg.inv(gram)
    kg = g.astype(np.float32)
    kx = (g * x).astype(np.float32)
    kxx = (g * x * x).astype(np.float32)
    return kg, kx, kxx, inv, s2, s22


def _packed_expansion_ref(frame: np.ndarray, poly_n: int, sigma: float) -> np.ndarray:
    """(H, W, 5) float32 of [a11, a12, a22, b1, b2]; borders replicate."""
    f = np.ascontiguousarray(frame, dtype=np.float32)
    kg, kx, kxx, inv, s2, s22 = _expansion_kernels(poly_n, sigma)
    # Separable moments: row pass along x, column pass along y.
    p0 = correlate1d(f, kg, axis=1, mode="nearest")
    p1 = correlate1d(f, kx, axis=1, mode="nearest")
    p2 = correlate1d(f, kxx, axis=1, mode="nearest")
    m00 = correlate1d(p0, kg, axis=0, mode="nearest")
    m10 = correlate1d(p1, kg, axis=0, mode="nearest")
    m01 = correlate1d(p0, kx, axis=0, mode="nearest")
    m20 = correlate1d(p2, kg, axis=0, mode="nearest")
    m02 = correlate1d(p0, kxx, axis=0, mode="nearest")
    m11 = correlate1d(p1, kx, axis=0, mode="nearest")
    out = np.empty(f.shape + (5,), dtype=np.float32)
    out[..., 0] = inv[1, 0] * m00 + inv[1, 1] * m20 + inv[1, 2] * m02   # a11 (x^2)
    out[..., 1] = m11 * np.float32(0.5 / s22)                           # a12 (xy / 2)
    out[..., 2] = inv[2, 0] * m00 + inv[2, 1] * m20 + inv[2, 2] * m02   # a22 (y^2)
    out[..., 3] = m10 * np.float32(1.0 / s2)                            # b1  (x)
    out[..., 4] = m01 * np.float32(1.0 / s2)                            # b2  (y)
    return out


def _expansion_coeff(inv: np.ndarray, s2: float, s22: float) -> np.ndarray:
    return np.array(
        [inv[1, 0], inv[1, 1], inv[1, 2], inv[2, 0], inv[2, 1], inv[2, 2],
         1.0 / s2, 0.5 / s22],
        dtype=np.float32,
    )


def _packed_expansion(frame: np.ndarray, poly_n: int, sigma: float) -> np.ndarray:
    if not _HAVE_NUMBA:
        return _packed_expansion_ref(frame, poly_n, sigma)
    f = np.ascontiguousarray(frame, dtype=np.float32)
    kg, kx, kxx, inv, s2, s22 = _expansion_kernels(poly_n, sigma)
    tmp = np.empty(f.shape + (3,), dtype=np.float32)
    out = np.empty(f.shape + (5,), dtype=np.float32)
    _moments_row_nb(f, kg, kx, kxx, tmp)
    _moments_col_nb(tmp, kg, kx, kxx, _expansion_coeff(inv, s2, s22), out)
    return out


def polynomial_expansion(frame: np.ndarray, poly_n: int = 5,
                         poly_sigma: float = 1.2) -> PolyExpansion:
    """Weighted least-squares quadratic fit around every pixel."""
    FlowParams(poly_n=poly_n, poly_sigma=poly_sigma)
    f = np.ascontiguousarray(frame, dtype=np.float32)
    if f.ndim != 2 or f.size == 0:
        raise GeometryMismatch("frame must be a nonempty 2D array")
    packed = _packed_expansion(f, poly_n, poly_sigma)
    kg, kx, kxx, inv, s2, s22 = _expansion_kernels(poly_n, poly_sigma)
    p0 = correlate1d(f, kg, axis=1, mode="nearest")
    p2 = correlate1d(f, kxx, axis=1, mode="nearest")
    m00 = correlate1d(p0, kg, axis=0, mode="nearest")
    m20 = correlate1d(p2, kg, axis=0, mode="nearest")
    m02 = correlate1d(p0, kxx, axis=0, mode="nearest")
    c = inv[0, 0] * m00 + inv[0, 1] * m20 + inv[0, 2] * m02
    h, w = f.shape
    a = np.empty((h, w, 2, 2), dtype=np.float32)
    a[..., 0, 0] = packed[..., 0]
    a[..., 0, 1] = packed[..., 1]
    a[..., 1, 0] = packed[..., 1]
    a[..., 1, 1] = packed[..., 2]
    return PolyExpansion(a=a, b=packed[..., 3:5].copy(), c=c.astype(np.float32))


def _resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Pixel-center aligned bilinear resize with replicate borders."""
    in_h, in_w = img.shape[:2]
    if (in_h, in_w) == (out_h, out_w):
        return img.astype(np.float32, copy=True)
    sy = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0, in_h - 1)
    sx = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0, in_w - 1)
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (sy - y0).astype(np.float32)
    wx = (sx - x0).astype(np.float32)
    if img.ndim == 2:
        top = img[y0][:, x0] * (1 - wx) + img[y0][:, x1] * wx
        bot = img[y1][:, x0] * (1 - wx) + img[y1][:, x1] * wx
        return (top * (1 - wy)[:, None] + bot * wy[:, None]).astype(np.float32)
    wy2 = wy[:, None, None]
    wx2 = wx[None, :, None]
    top = img[y0][:, x0] * (1 - wx2) + img[y0][:, x1] * wx2
    bot = img[y1][:, x0] * (1 - wx2) + img[y1][:, x1] * wx2
    return (top * (1 - wy2) + bot * wy2).astype(np.float32)


def _pyr_down_binomial(img: np.ndarray) -> np.ndarray:
    """5-tap binomial antialias then 2x decimation (pyr_scale = 0.5 path)."""
    sm = correlate1d(img, _BINOMIAL5, axis=0, mode="nearest")
    sm = correlate1d(sm, _BINOMIAL5, axis=1, mode="nearest")
    return np.ascontiguousarray(sm[::2, ::2])


def _pyramid(img: np.ndarray, params: FlowParams) -> list[np.ndarray]:
    levels = [np.ascontiguousarray(img, dtype=np.float32)]
    exact_half = abs(params.pyr_scale - 0.5) < 1e-9
    while len(levels) < params.levels:
        prev = levels[-1]
        if exact_half:
            if _HAVE_NUMBA:
                h, w = prev.shape
                ho, wo = (h + 1) // 2, (w + 1) // 2
                nxt = np.empty((ho, wo), dtype=np.float32)
                rowbuf = np.empty((h, wo), dtype=np.float32)
                _pyr_down_nb(prev, _BINOMIAL5, rowbuf, nxt)
            else:
                nxt = _pyr_down_binomial(prev)
        else:
            h = max(1, round(prev.shape[0] * params.pyr_scale))
            w = max(1, round(prev.shape[1] * params.pyr_scale))
            nxt = _resize_bilinear(prev, h, w)
        if min(nxt.shape) < params.poly_n:
            break  # level smaller than the expansion window is skipped
        levels.append(nxt)
    return levels


def _build_systems_ref(e0: np.ndarray, e1: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Vectorized reference for the warp + normal-equation step."""
    h, w = e0.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float32)
    sx = np.clip(xs + flow[..., 0], 0, w - 1)
    sy = np.clip(ys + flow[..., 1], 0, h - 1)
    x0 = sx.astype(np.int64)
    y0 = sy.astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = (sx - x0)[..., None]
    wy = (sy - y0)[..., None]
    e1w = (e1[y0, x0] * (1 - wx) * (1 - wy) + e1[y0, x1] * wx * (1 - wy)
           + e1[y1, x0] * (1 - wx) * wy + e1[y1, x1] * wx * wy)
    a11 = np.float32(0.5) * (e0[..., 0] + e1w[..., 0])
    a12 = np.float32(0.5) * (e0[..., 1] + e1w[..., 1])
    a22 = np.float32(0.5) * (e0[..., 2] + e1w[..., 2])
    db1 = np.float32(-0.5) * (e1w[..., 3] - e0[..., 3]) + a11 * flow[..., 0] + a12 * flow[..., 1]
    db2 = np.float32(-0.5) * (e1w[..., 4] - e0[..., 4]) + a12 * flow[..., 0] + a22 * flow[..., 1]
    out = np.empty(e0.shape[:2] + (5,), dtype=np.float32)
    out[..., 0] = a11 * a11 + a12 * a12
    out[..., 1] = a12 * (a11 + a22)
    out[..., 2] = a12 * a12 + a22 * a22
    out[..., 3] = a11 * db1 + a12 * db2
    out[..., 4] = a12 * db1 + a22 * db2
    return out


if _HAVE_NUMBA:

    @njit(cache=True)
    def _moments_row_nb(f, kg, kx, kxx, tmp):  # pragma: no cover - jitted
        h, w = f.shape
        taps = kg.shape[0]
        r = taps // 2
        for y in range(h):
            for x in range(w):
                p0 = np.float32(0.0)
                p1 = np.float32(0.0)
                p2 = np.float32(0.0)
                for k in range(taps):
                    xi = x + k - r
                    if xi < 0:
                        xi = 0
                    elif xi >= w:
                        xi = w - 1
                    val = f[y, xi]
                    p0 += kg[k] * val
                    p1 += kx[k] * val
                    p2 += kxx[k] * val
                tmp[y, x, 0] = p0
                tmp[y, x, 1] = p1
                tmp[y, x, 2] = p2

    @njit(cache=True)
    def _moments_col_nb(tmp, kg, kx, kxx, coeff, out):  # pragma: no cover - jitted
        h, w = tmp.shape[0], tmp.shape[1]
        taps = kg.shape[0]
        r = taps // 2
        for y in range(h):
            for x in range(w):
                m00 = np.float32(0.0)
                m10 = np.float32(0.0)
                m01 = np.float32(0.0)
                m20 = np.float32(0.0)
                m02 = np.float32(0.0)
                m11 = np.float32(0.0)
                for k in range(taps):
                    yi = y + k - r
                    if yi < 0:
                        yi = 0
                    elif yi >= h:
                        yi = h - 1
                    p0 = tmp[yi, x, 0]
                    p1 = tmp[yi, x, 1]
                    p2 = tmp[yi, x, 2]
                    m00 += kg[k] * p0
                    m10 += kg[k] * p1
                    m01 += kx[k] * p0
                    m20 += kg[k] * p2
                    m02 += kxx[k] * p0
                    m11 += kx[k] * p1
                out[y, x, 0] = coeff[0] * m00 + coeff[1] * m20 + coeff[2] * m02
                out[y, x, 1] = m11 * coeff[7]
                out[y, x, 2] = coeff[3] * m00 + coeff[4] * m20 + coeff[5] * m02
                out[y, x, 3] = m10 * coeff[6]
                out[y, x, 4] = m01 * coeff[6]

    @njit(cache=True)
    def _box_x_nb(src, dst, r):  # pragma: no cover - jitted
        """Sliding winsize sum along x with replicate border, float64 accumulation."""
        h, w, c = src.shape
        for y in range(h):
            a0 = (r + 1) * np.float64(src[y, 0, 0])
            a1 = (r + 1) * np.float64(src[y, 0, 1])
            a2 = (r + 1) * np.float64(src[y, 0, 2])
            a3 = (r + 1) * np.float64(src[y, 0, 3])
            a4 = (r + 1) * np.float64(src[y, 0, 4])
            for x in range(1, r + 1):
                xi = x if x < w else w - 1
                a0 += np.float64(src[y, xi, 0])
                a1 += np.float64(src[y, xi, 1])
                a2 += np.float64(src[y, xi, 2])
                a3 += np.float64(src[y, xi, 3])
                a4 += np.float64(src[y, xi, 4])
            for x in range(w):
                dst[y, x, 0] = a0
                dst[y, x, 1] = a1
                dst[y, x, 2] = a2
                dst[y, x, 3] = a3
                dst[y, x, 4] = a4
                hi = x + 1 + r
                if hi >= w:
                    hi = w - 1
                lo = x - r
                if lo < 0:
                    lo = 0
                a0 += np.float64(src[y, hi, 0]) - np.float64(src[y, lo, 0])
                a1 += np.float64(src[y, hi, 1]) - np.float64(src[y, lo, 1])
                a2 += np.float64(src[y, hi, 2]) - np.float64(src[y, lo, 2])
                a3 += np.float64(src[y, hi, 3]) - np.float64(src[y, lo, 3])
                a4 += np.float64(src[y, hi, 4]) - np.float64(src[y, lo, 4])

    @njit(cache=True)
    def _box_y_solve_nb(tmp, r, inv_area, ridge, det_floor, flow):  # pragma: no cover
        """Sliding winsize sum along y fused with the per-pixel 2x2 solve."""
        h, w, c = tmp.shape
        acc = np.empty((w, c), dtype=np.float64)
        for x in range(w):
            for ch in range(c):
                acc[x, ch] = (r + 1) * tmp[0, x, ch]
        for y in range(1, r + 1):
            yi = y if y < h else h - 1
            for x in range(w):
                for ch in range(c):
                    acc[x, ch] += tmp[yi, x, ch]
        for y in range(h):
            for x in range(w):
                g11 = acc[x, 0] * inv_area + ridge
                g12 = acc[x, 1] * inv_area
                g22 = acc[x, 2] * inv_area + ridge
                h1 = acc[x, 3] * inv_area
                h2 = acc[x, 4] * inv_area
                det = g11 * g22 - g12 * g12
                if det >= det_floor:
                    flow[y, x, 0] = np.float32((g22 * h1 - g12 * h2) / det)
                    flow[y, x, 1] = np.float32((g11 * h2 - g12 * h1) / det)
                else:
                    flow[y, x, 0] = np.float32(0.0)
                    flow[y, x, 1] = np.float32(0.0)
            hi = y + 1 + r
            if hi >= h:
                hi = h - 1
            lo = y - r
            if lo < 0:
                lo = 0
            for x in range(w):
                for ch in range(c):
                    acc[x, ch] += tmp[hi, x, ch] - tmp[lo, x, ch]

    @njit(cache=True)
    def _pyr_down_nb(src, kb, rowbuf, dst):  # pragma: no cover - jitted
        """Binomial antialias fused with 2x decimation on both axes."""
        h, w = src.shape
        ho, wo = dst.shape
        for y in range(h):
            for xo in range(wo):
                x = 2 * xo
                acc = np.float32(0.0)
                for k in range(5):
                    xi = x + k - 2
                    if xi < 0:
                        xi = 0
                    elif xi >= w:
                        xi = w - 1
                    acc += kb[k] * src[y, xi]
                rowbuf[y, xo] = acc
        for yo in range(ho):
            y = 2 * yo
            for xo in range(wo):
                acc = np.float32(0.0)
                for k in range(5):
                    yi = y + k - 2
                    if yi < 0:
                        yi = 0
                    elif yi >= h:
                        yi = h - 1
                    acc += kb[k] * rowbuf[yi, xo]
                dst[yo, xo] = acc

    @njit(cache=True)
    def _upsample_flow_nb(src, dst, gain):  # pragma: no cover - jitted
        """Pixel-center bilinear upsample of a 2-channel field, times gain."""
        hs, ws = src.shape[0], src.shape[1]
        hd, wd = dst.shape[0], dst.shape[1]
        ry = hs / hd
        rx = ws / wd
        one = np.float32(1.0)
        for y in range(hd):
            sy = (y + 0.5) * ry - 0.5
            if sy < 0.0:
                sy = 0.0
            elif sy > hs - 1:
                sy = float(hs - 1)
            y0 = int(sy)
            y1 = y0 + 1 if y0 + 1 < hs else hs - 1
            fy = np.float32(sy - y0)
            for x in range(wd):
                sx = (x + 0.5) * rx - 0.5
                if sx < 0.0:
                    sx = 0.0
                elif sx > ws - 1:
                    sx = float(ws - 1)
                x0 = int(sx)
                x1 = x0 + 1 if x0 + 1 < ws else ws - 1
                fx = np.float32(sx - x0)
                for ch in range(2):
                    top = src[y0, x0, ch] * (one - fx) + src[y0, x1, ch] * fx
                    bot = src[y1, x0, ch] * (one - fx) + src[y1, x1, ch] * fx
                    dst[y, x, ch] = (top * (one - fy) + bot * fy) * gain

    @njit(cache=True)
    def _build_systems_nb(e0, e1, flow, out):  # pragma: no cover - jitted
        h, w = e0.shape[0], e0.shape[1]
        half = np.float32(0.5)
        one = np.float32(1.0)
        for y in range(h):
            for x in range(w):
                sx = np.float32(x) + flow[y, x, 0]
                sy = np.float32(y) + flow[y, x, 1]
                if sx < 0.0:
                    sx = np.float32(0.0)
                elif sx > w - 1:
                    sx = np.float32(w - 1)
                if sy < 0.0:
                    sy = np.float32(0.0)
                elif sy > h - 1:
                    sy = np.float32(h - 1)
                x0 = int(sx)
                y0 = int(sy)
                x1 = x0 + 1 if x0 + 1 < w else w - 1
                y1 = y0 + 1 if y0 + 1 < h else h - 1
                fx = sx - np.float32(x0)
                fy = sy - np.float32(y0)
                w00 = (one - fx) * (one - fy)
                w01 = fx * (one - fy)
                w10 = (one - fx) * fy
                w11 = fx * fy
                a11w = (e1[y0, x0, 0] * w00 + e1[y0, x1, 0] * w01
                        + e1[y1, x0, 0] * w10 + e1[y1, x1, 0] * w11)
                a12w = (e1[y0, x0, 1] * w00 + e1[y0, x1, 1] * w01
                        + e1[y1, x0, 1] * w10 + e1[y1, x1, 1] * w11)
                a22w = (e1[y0, x0, 2] * w00 + e1[y0, x1, 2] * w01
                        + e1[y1, x0, 2] * w10 + e1[y1, x1, 2] * w11)
                b1w = (e1[y0, x0, 3] * w00 + e1[y0, x1, 3] * w01
                       + e1[y1, x0, 3] * w10 + e1[y1, x1, 3] * w11)
                b2w = (e1[y0, x0, 4] * w00 + e1[y0, x1, 4] * w01
                       + e1[y1, x0, 4] * w10 + e1[y1, x1, 4] * w11)
                a11 = half * (e0[y, x, 0] + a11w)
                a12 = half * (e0[y, x, 1] + a12w)
                a22 = half * (e0[y, x, 2] + a22w)
                db1 = -half * (b1w - e0[y, x, 3]) + a11 * flow[y, x, 0] + a12 * flow[y, x, 1]
                db2 = -half * (b2w - e0[y, x, 4]) + a12 * flow[y, x, 0] + a22 * flow[y, x, 1]
                out[y, x, 0] = a11 * a11 + a12 * a12
                out[y, x, 1] = a12 * (a11 + a22)
                out[y, x, 2] = a12 * a12 + a22 * a22
                out[y, x, 3] = a11 * db1 + a12 * db2
                out[y, x, 4] = a12 * db1 + a22 * db2


def _build_systems(e0: np.ndarray, e1: np.ndarray, flow: np.ndarray) -> np.ndarray:
    if _HAVE_NUMBA:
        out = np.empty(e0.shape[:2] + (5,), dtype=np.float32)
        _build_systems_nb(e0, e1, flow, out)
        return out
    return _build_systems_ref(e0, e1, flow)


def _solve_flow_ref(systems: np.ndarray, winsize: int) -> np.ndarray:
    """Average the normal equations over the window and solve per pixel."""
    m = uniform_filter(systems.astype(np.float64),
                       size=(winsize, winsize, 1), mode="nearest")
    g11 = m[..., 0] + _RIDGE
    g12 = m[..., 1]
    g22 = m[..., 2] + _RIDGE
    det = g11 * g22 - g12 * g12
    ok = det >= _DET_FLOOR
    safe = np.where(ok, det, 1.0)
    flow = np.empty(systems.shape[:2] + (2,), dtype=np.float32)
    flow[..., 0] = np.where(ok, (g22 * m[..., 3] - g12 * m[..., 4]) / safe, 0.0)
    flow[..., 1] = np.where(ok, (g11 * m[..., 4] - g12 * m[..., 3]) / safe, 0.0)
    return flow


def _solve_flow(systems: np.ndarray, winsize: int) -> np.ndarray:
    if not _HAVE_NUMBA:
        return _solve_flow_ref(systems, winsize)
    r = winsize // 2
    tmp = np.empty(systems.shape, dtype=np.float64)
    _box_x_nb(systems, tmp, r)
    flow = np.empty(systems.shape[:2] + (2,), dtype=np.float32)
    _box_y_solve_nb(tmp, r, 1.0 / (winsize * winsize), _RIDGE, _DET_FLOOR, flow)
    return flow


class _Workspace:
    """Reusable per-level scratch buffers, keyed by level geometry.

    One workspace serves one flow computation at a time; concurrent frame
    pairs each get their own.
    """

    def __init__(self) -> None:
        self._levels: dict[tuple[int, int], dict[str, np.ndarray]] = {}
        self._towers: dict[tuple[int, int, int], np.ndarray] = {}

    def level(self, h: int, w: int) -> dict[str, np.ndarray]:
        key = (h, w)
        bufs = self._levels.get(key)
        if bufs is None:
            bufs = {
                "systems": np.empty((h, w, 5), dtype=np.float32),
                "tmp64": np.empty((h, w, 5), dtype=np.float64),
                "tmp3": np.empty((h, w, 3), dtype=np.float32),
                "flow_a": np.empty((h, w, 2), dtype=np.float32),
                "flow_b": np.empty((h, w, 2), dtype=np.float32),
            }
            self._levels[key] = bufs
        return bufs

    def expansion_buf(self, slot: int, h: int, w: int) -> np.ndarray:
        key = (slot, h, w)
        buf = self._towers.get(key)
        if buf is None:
            buf = np.empty((h, w, 5), dtype=np.float32)
            self._towers[key] = buf
        return buf


def _frame_tower(img: np.ndarray, params: FlowParams, ws: _Workspace,
                 slot: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pyramid plus packed expansion per level for one frame.

    Towers are cached by flow_sequence so the shared frame of consecutive
    pairs is expanded once; expansions live in workspace slot buffers, so
    at most two towers per workspace may be alive at a time.
    """
    kg, kx, kxx, inv, s2, s22 = _expansion_kernels(params.poly_n, params.poly_sigma)
    coeff = _expansion_coeff(inv, s2, s22)
    tower = []
    for lv in _pyramid(img, params):
        h, w = lv.shape
        e = ws.expansion_buf(slot, h, w)
        _moments_row_nb(lv, kg, kx, kxx, ws.level(h, w)["tmp3"])
        _moments_col_nb(ws.level(h, w)["tmp3"], kg, kx, kxx, coeff, e)
        tower.append((lv, e))
    return tower


def _dense_flow_fast(tower0: list, tower1: list, params: FlowParams,
                     ws: _Workspace) -> np.ndarray:
    """Numba path over precomputed towers; returns a workspace-owned buffer
    that callers must copy if they keep it."""
    r = params.winsize // 2
    inv_area = 1.0 / (params.winsize * params.winsize)
    gain = np.float32(1.0 / params.pyr_scale)
    flow: np.ndarray | None = None
    for level in range(len(tower0) - 1, -1, -1):
        img0, e0 = tower0[level]
        img1, e1 = tower1[level]
        h, w = img0.shape
        bufs = ws.level(h, w)
        if flow is None:
            flow = bufs["flow_a"]
            flow[:] = 0.0
        else:
            _upsample_flow_nb(flow, bufs["flow_a"], gain)
            flow = bufs["flow_a"]
        flow_next = bufs["flow_b"]
        for _ in range(params.iterations):
            _build_systems_nb(e0, e1, flow, bufs["systems"])
            _box_x_nb(bufs["systems"], bufs["tmp64"], r)
            _box_y_solve_nb(bufs["tmp64"], r, inv_area, _RIDGE, _DET_FLOOR, flow_next)
            flow, flow_next = flow_next, flow
    return flow


def _dense_flow_ref(pyr0: list[np.ndarray], pyr1: list[np.ndarray],
                    params: FlowParams) -> np.ndarray:
    flow: np.ndarray | None = None
    for level in range(len(pyr0) - 1, -1, -1):
        img0, img1 = pyr0[level], pyr1[level]
        h, w = img0.shape
        if flow is None:
            flow = np.zeros((h, w, 2), dtype=np.float32)
        else:
            up = np.empty((h, w, 2), dtype=np.float32)
            up[..., 0] = _resize_bilinear(flow[..., 0], h, w)
            up[..., 1] = _resize_bilinear(flow[..., 1], h, w)
            flow = up * np.float32(1.0 / params.pyr_scale)
        e0 = _packed_expansion(img0, params.poly_n, params.poly_sigma)
        e1 = _packed_expansion(img1, params.poly_n, params.poly_sigma)
        for _ in range(params.iterations):
            systems = _build_systems(e0, e1, flow)
            flow = _solve_flow(systems, params.winsize)
    return flow


def dense_flow(prev: np.ndarray, nxt: np.ndarray,
               params: FlowParams | None = None) -> FlowField:
    """Coarse-to-fine dense flow from ``prev`` to ``nxt``.

    Positive u means rightward motion, positive v downward. The output is
    finite everywhere: singular local systems emit zero displacement.
    """
    params = params or FlowParams()
    prev = np.ascontiguousarray(prev, dtype=np.float32)
    nxt = np.ascontiguousarray(nxt, dtype=np.float32)
    if prev.shape != nxt.shape or prev.ndim != 2:
        raise GeometryMismatch(f"frame shapes differ: {prev.shape} vs {nxt.shape}")
    if min(prev.shape) < params.poly_n:
        raise GeometryMismatch(
            f"frames must be at least poly_n={params.poly_n} pixels per side"
        )
    if _HAVE_NUMBA:
        ws = _Workspace()
        tower0 = _frame_tower(prev, params, ws, slot=0)
        tower1 = _frame_tower(nxt, params, ws, slot=1)
        flow = _dense_flow_fast(tower0, tower1, params, ws).copy()
    else:
        flow = _dense_flow_ref(_pyramid(prev, params), _pyramid(nxt, params), params)
    return FlowField(width=prev.shape[1], height=prev.shape[0], uv=flow)


def flow_sequence(frames: FrameSequence,
                  params: FlowParams | None = None) -> FlowSequence:
    """Flow between every consecutive frame pair; field t is the motion
    arriving at frame t + 1.

    Consecutive pairs share a frame, so each frame's pyramid and expansion
    are computed once and carried over.
    """
    params = params or FlowParams()
    n = len(frames)
    fields = np.empty((max(n - 1, 0), frames.height, frames.width, 2),
                      dtype=np.float32)
    if n < 2:
        return FlowSequence(frames.width, frames.height, fields, frames.frame_rate)
    if not _HAVE_NUMBA:
        for t in range(n - 1):
            fields[t] = dense_flow(frames.frames[t], frames.frames[t + 1], params).uv
        return FlowSequence(frames.width, frames.height, fields, frames.frame_rate)
    ws = _Workspace()
    prev_tower = _frame_tower(np.ascontiguousarray(frames.frames[0]), params, ws, slot=0)
    for t in range(n - 1):
        next_tower = _frame_tower(np.ascontiguousarray(frames.frames[t + 1]),
                                  params, ws, slot=(t + 1) % 2)
        fields[t] = _dense_flow_fast(prev_tower, next_tower, params, ws)
        prev_tower = next_tower
    return FlowSequence(frames.width, frames.height, fields, frames.frame_rate)


def warm_up(size: int = 48) -> None:
    """Trigger JIT compilation on a tiny input so timed runs measure
    steady-state throughput."""
    rng = np.random.default_rng(0)
    img = rng.random((size, size)).astype(np.float32)
    dense_flow(img, img, FlowParams(levels=1))
