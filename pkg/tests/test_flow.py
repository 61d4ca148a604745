"""Optical-flow tests: expansion exactness, shift oracles, invariances."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from zstripe import flow as flowmod
from zstripe.errors import GeometryMismatch
from zstripe.flow import (
    FlowParams,
    dense_flow,
    flow_sequence,
    polynomial_expansion,
)
from zstripe.media_io import FrameSequence


def textured(h, w, seed=0, sigma=2.0):
    rng = np.random.default_rng(seed)
    img = gaussian_filter(rng.random((h, w)), sigma)
    lo, hi = img.min(), img.max()
    return (0.1 + 0.8 * (img - lo) / (hi - lo)).astype(np.float32)


def shift_right(img, px):
    out = np.empty_like(img)
    out[:, px:] = img[:, :-px]
    out[:, :px] = img[:, :1]
    return out


def shift_down(img, px):
    out = np.empty_like(img)
    out[px:, :] = img[:-px, :]
    out[:px, :] = img[:1, :]
    return out


def test_params_validation():
    with pytest.raises(ValueError):
        FlowParams(pyr_scale=1.0)
    with pytest.raises(ValueError):
        FlowParams(winsize=4)
    with pytest.raises(ValueError):
        FlowParams(poly_n=4)
    with pytest.raises(ValueError):
        FlowParams(poly_sigma=0.0)
    with pytest.raises(ValueError):
        FlowParams(levels=0)
    with pytest.raises(ValueError):
        FlowParams(iterations=0)


def test_expansion_constant_image():
    ex = polynomial_expansion(np.full((30, 30), 0.7, dtype=np.float32))
    assert np.abs(ex.a).max() < 1e-6
    assert np.abs(ex.b).max() < 1e-6
    assert np.abs(ex.c - 0.7).max() < 1e-6


def test_expansion_linear_ramp():
    x = np.arange(64, dtype=np.float32)
    frame = np.tile(0.01 * x, (48, 1))
    ex = polynomial_expansion(frame)
    inner = (slice(4, -4), slice(4, -4))
    assert np.abs(ex.b[..., 0][inner] - 0.01).max() < 1e-6
    assert np.abs(ex.b[..., 1][inner]).max() < 1e-6
    assert np.abs(ex.a[inner]).max() < 1e-6


def test_expansion_vertical_ramp():
    y = np.arange(48, dtype=np.float32)[:, None]
    frame = np.tile(0.01 * y, (1, 64))
    ex = polynomial_expansion(frame)
    inner = (slice(4, -4), slice(4, -4))
    assert np.abs(ex.b[..., 1][inner] - 0.01).max() < 1e-6
    assert np.abs(ex.b[..., 0][inner]).max() < 1e-6


def test_expansion_quadratic():
    a = 5e-4
    x = np.arange(64, dtype=np.float32)
    frame = np.tile(a * (x - 32.0) ** 2, (48, 1)).astype(np.float32)
    ex = polynomial_expansion(frame)
    inner = (slice(4, -4), slice(4, -4))
    assert np.abs(ex.a[..., 0, 0][inner] - a).max() < 1e-5
    assert np.abs(ex.a[..., 1, 1][inner]).max() < 1e-5


def test_expansion_cross_term():
    x = np.arange(64, dtype=np.float32)[None, :]
    y = np.arange(64, dtype=np.float32)[:, None]
    a = 2e-4
    frame = (a * (x - 32) * (y - 32)).astype(np.float32)
    ex = polynomial_expansion(frame)
    inner = (slice(6, -6), slice(6, -6))
    # A[0][1] holds half the xy coefficient
    assert np.abs(ex.a[..., 0, 1][inner] - a / 2).max() < 1e-5


def test_expansion_symmetry_invariant():
    ex = polynomial_expansion(textured(40, 40, seed=3))
    np.testing.assert_array_equal(ex.a[..., 0, 1], ex.a[..., 1, 0])


def test_expansion_rejects_empty():
    with pytest.raises(GeometryMismatch):
        polynomial_expansion(np.zeros((0, 5), dtype=np.float32))


def test_packed_expansion_backends_agree():
    if not flowmod._HAVE_NUMBA:
        pytest.skip("numba unavailable")
    img = textured(64, 80, seed=4)
    fast = flowmod._packed_expansion(img, 5, 1.2)
    ref = flowmod._packed_expansion_ref(img, 5, 1.2)
    np.testing.assert_allclose(fast, ref, atol=1e-5)


def test_solve_backends_agree():
    if not flowmod._HAVE_NUMBA:
        pytest.skip("numba unavailable")
    rng = np.random.default_rng(5)
    img = textured(64, 80, seed=5)
    e = flowmod._packed_expansion(img, 5, 1.2)
    fl = rng.normal(0, 1, size=(64, 80, 2)).astype(np.float32)
    systems = flowmod._build_systems(e, e, fl)
    np.testing.assert_allclose(flowmod._solve_flow(systems, 15),
                               flowmod._solve_flow_ref(systems, 15), atol=1e-6)


def test_build_systems_backends_agree():
    if not flowmod._HAVE_NUMBA:
        pytest.skip("numba unavailable")
    rng = np.random.default_rng(6)
    img0 = textured(48, 56, seed=6)
    img1 = textured(48, 56, seed=7)
    e0 = flowmod._packed_expansion(img0, 5, 1.2)
    e1 = flowmod._packed_expansion(img1, 5, 1.2)
    fl = rng.normal(0, 2, size=(48, 56, 2)).astype(np.float32)
    out = np.empty((48, 56, 5), dtype=np.float32)
    flowmod._build_systems_nb(e0, e1, fl, out)
    ref = flowmod._build_systems_ref(e0, e1, fl)
    np.testing.assert_allclose(out, ref, atol=2e-5)


def test_identical_frames_zero_flow():
    img = textured(96, 128, seed=8)
    ff = dense_flow(img, img)
    assert np.abs(ff.uv).max() <= 0.1


def test_uniform_pair_zero_flow():
    img = np.full((64, 64), 0.5, dtype=np.float32)
    ff = dense_flow(img, img.copy())
    assert np.abs(ff.uv).max() == 0.0


def test_horizontal_shift_recovery():
    img = textured(128, 128, seed=9)
    ff = dense_flow(img, shift_right(img, 2))
    inner = ff.uv[16:-16, 16:-16]
    err = np.linalg.norm(inner - np.array([2.0, 0.0], dtype=np.float32), axis=-1)
    assert (err <= 0.5).mean() >= 0.9


def test_vertical_shift_recovery():
    img = textured(128, 128, seed=10)
    ff = dense_flow(img, shift_down(img, 2))
    inner = ff.uv[16:-16, 16:-16]
    err = np.linalg.norm(inner - np.array([0.0, 2.0], dtype=np.float32), axis=-1)
    assert (err <= 0.5).mean() >= 0.9


def test_flow_always_finite():
    rng = np.random.default_rng(11)
    a = rng.random((40, 40)).astype(np.float32)
    b = rng.random((40, 40)).astype(np.float32)
    ff = dense_flow(a, b)
    assert np.isfinite(ff.uv).all()


def test_geometry_mismatch_rejected():
    with pytest.raises(GeometryMismatch):
        dense_flow(np.zeros((32, 32), dtype=np.float32),
                   np.zeros((32, 33), dtype=np.float32))


def test_too_small_frame_rejected():
    with pytest.raises(GeometryMismatch):
        dense_flow(np.zeros((3, 64), dtype=np.float32),
                   np.zeros((3, 64), dtype=np.float32))


@pytest.mark.parametrize("shift", [(2, 0), (0, 2), (4, 4)])
def test_shift_equivariance(shift):
    """flow(shift(a), shift(b)) equals shifted flow(a, b) in the interior."""
    sx, sy = shift
    img = textured(128, 128, seed=12)
    nxt = shift_right(img, 1)
    base = dense_flow(img, nxt).uv
    shifted_prev = np.roll(np.roll(img, sy, axis=0), sx, axis=1)
    shifted_next = np.roll(np.roll(nxt, sy, axis=0), sx, axis=1)
    moved = dense_flow(shifted_prev, shifted_next).uv
    expected = np.roll(np.roll(base, sy, axis=0), sx, axis=1)
    margin = 16
    diff = np.linalg.norm(
        moved[margin:-margin, margin:-margin]
        - expected[margin:-margin, margin:-margin], axis=-1)
    assert np.median(diff) <= 0.25
    assert (diff <= 0.25).mean() >= 0.9


def test_flow_sequence_matches_dense_flow():
    imgs = [textured(64, 80, seed=s) for s in (20, 21, 22)]
    seq = FrameSequence(80, 64, np.stack(imgs))
    flows = flow_sequence(seq)
    assert len(flows) == 2
    for t in range(2):
        single = dense_flow(imgs[t], imgs[t + 1]).uv
        np.testing.assert_allclose(flows.fields[t], single, atol=1e-6)


def test_flow_sequence_empty_and_single():
    seq0 = FrameSequence(16, 16, np.zeros((0, 16, 16), dtype=np.float32))
    assert len(flow_sequence(seq0)) == 0
    seq1 = FrameSequence(16, 16, np.zeros((1, 16, 16), dtype=np.float32))
    assert len(flow_sequence(seq1)) == 0


def test_subpixel_shift_recovery():
    # half-pixel synthetic shift via linear interpolation of a smooth texture
    img = textured(128, 128, seed=13, sigma=3.0)
    nxt = 0.5 * img + 0.5 * shift_right(img, 1)
    ff = dense_flow(img, nxt)
    inner = ff.uv[20:-20, 20:-20]
    assert abs(np.median(inner[..., 0]) - 0.5) < 0.15
    assert abs(np.median(inner[..., 1])) < 0.1
