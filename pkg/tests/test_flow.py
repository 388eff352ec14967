import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikeact.flow import (
    FlowField,
    FlowParams,
    farneback_flow,
    flow_sequence,
    flow_single_scale,
    polynomial_expansion,
)

from oracles import poly_fit_at, shifted_pair, textured_frame


def test_default_params():
    p = FlowParams()
    assert (p.pyramid_levels, p.pyramid_scale, p.window_size, p.iterations, p.poly_n, p.poly_sigma) == (
        3, 0.5, 15, 3, 5, 1.1,
    )


@pytest.mark.parametrize(
    "kw", [{"window_size": 4}, {"window_size": 1}, {"poly_n": 6}, {"pyramid_scale": 1.0}, {"pyramid_scale": 0.0}]
)
def test_param_validation(kw):
    with pytest.raises(ValueError):
        FlowParams(**kw)


def test_flowfield_rejects_non_finite():
    with pytest.raises(ValueError):
        FlowField(np.array([[np.nan]]), np.zeros((1, 1)))


# -- polynomial expansion ---------------------------------------------------


def test_expansion_of_constant():
    e = polynomial_expansion(np.full((12, 12), 0.37))
    inner = (slice(3, -3), slice(3, -3))
    assert np.allclose(e.coeffs[inner], 0.0, atol=1e-12)
    assert np.allclose(e.c[inner], 0.37)


def test_expansion_of_ramp():
    x = np.arange(16, dtype=np.float64)
    e = polynomial_expansion(np.tile(0.02 * x, (16, 1)))
    inner = (slice(3, -3), slice(3, -3))
    b = e.b[inner]
    assert np.allclose(b[..., 0], 0.02) and np.allclose(b[..., 1], 0.0, atol=1e-12)
    assert np.allclose(e.A[inner], 0.0, atol=1e-12)


def test_expansion_of_quadratic():
    alpha = 0.003
    x = np.arange(16, dtype=np.float64) - 8
    e = polynomial_expansion(np.tile(alpha * x * x, (16, 1)))
    a = e.A[3:-3, 3:-3]
    assert np.allclose(a[..., 0, 0], alpha) and np.allclose(a[..., 1, 1], 0, atol=1e-12)


def test_expansion_matches_pointwise_fit():
    img = textured_frame(np.random.default_rng(4), 14, 13)[:14, :13]
    e = polynomial_expansion(img, 5, 1.1)
    for y, x in ((0, 0), (1, 7), (6, 6), (13, 12), (9, 2)):
        c, b1, b2, a11, a22, a12 = poly_fit_at(img, y, x, 5, 1.1)
        assert np.allclose([e.c[y, x], *e.b[y, x], e.A[y, x, 0, 0], e.A[y, x, 1, 1], e.A[y, x, 0, 1]],
                           [c, b1, b2, a11, a22, a12], atol=1e-5)


def test_expansion_too_small():
    with pytest.raises(ValueError):
        polynomial_expansion(np.zeros((4, 10)), poly_n=5)


# -- single scale and full flow ---------------------------------------------


def test_identical_frames_zero_prior():
    e = polynomial_expansion(textured_frame(np.random.default_rng(0), 32, 32)[:32, :32])
    fl = flow_single_scale(e, e, 15)
    assert (fl.dx == 0).all() and (fl.dy == 0).all()


def test_constant_frames_give_zero_flow():
    e = polynomial_expansion(np.full((20, 20), 0.5))
    fl = flow_single_scale(e, e, 15)
    assert (fl.dx == 0).all() and (fl.dy == 0).all()


def test_textureless_pixels_keep_prior_without_ridge():
    e = polynomial_expansion(np.full((20, 20), 0.5))
    prior = FlowField(np.full((20, 20), 1.5), np.full((20, 20), -0.5))
    fl = flow_single_scale(e, e, 15, prior, reg=0.0)
    assert np.allclose(fl.dx, 1.5) and np.allclose(fl.dy, -0.5)
    z = polynomial_expansion(np.zeros((20, 20)))
    fl = flow_single_scale(z, z, 15, prior, reg=0.0)
    assert fl.singular == 400 and (fl.dx == 1.5).all()


def test_one_pixel_shift_single_scale():
    big = textured_frame(np.random.default_rng(1), 48, 48)
    prev, nxt = shifted_pair(big, 48, 48, 1, 0)
    fl = flow_single_scale(polynomial_expansion(prev), polynomial_expansion(nxt), 15)
    fl = flow_single_scale(polynomial_expansion(prev), polynomial_expansion(nxt), 15, fl)
    inner = (slice(8, -8), slice(8, -8))
    err = np.hypot(fl.dx - 1, fl.dy)[inner]
    assert np.median(err) <= 0.3


def test_shift_two_minus_one():
    big = textured_frame(np.random.default_rng(2), 64, 64)
    prev, nxt = shifted_pair(big, 64, 64, 2, -1)
    fl = farneback_flow(prev, nxt)
    inner = (slice(8, -8), slice(8, -8))
    assert abs(np.median(fl.dx[inner]) - 2) <= 0.3
    assert abs(np.median(fl.dy[inner]) + 1) <= 0.3


def test_pyramid_needed_for_large_shift():
    big = textured_frame(np.random.default_rng(1), 64, 64)
    prev, nxt = shifted_pair(big, 64, 64, 6, 0)
    inner = (slice(8, -8), slice(8, -8))
    deep = np.median(farneback_flow(prev, nxt, FlowParams(pyramid_levels=3)).dx[inner])
    flat = np.median(farneback_flow(prev, nxt, FlowParams(pyramid_levels=1)).dx[inner])
    assert abs(deep - 6) <= 0.3
    assert abs(flat - 6) > 1.0


def test_dims_mismatch():
    with pytest.raises(ValueError):
        farneback_flow(np.zeros((16, 16)), np.zeros((16, 17)))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(12, 40), st.integers(12, 40))
def test_zero_motion_identity(seed, h, w):
    f = np.random.default_rng(seed).random((h, w))
    fl = farneback_flow(f, f)
    assert (fl.dx == 0).all() and (fl.dy == 0).all()


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_output_is_finite(seed):
    rng = np.random.default_rng(seed)
    a = rng.random((24, 24)) * rng.random()
    b = np.clip(a + rng.normal(0, 0.2, a.shape), 0, 1)
    fl = farneback_flow(a, b)
    assert np.isfinite(fl.dx).all() and np.isfinite(fl.dy).all()


def test_flow_sequence_matches_pairwise():
    rng = np.random.default_rng(3)
    frames = [rng.random((20, 20)) for _ in range(4)]
    seq = flow_sequence(frames)
    assert len(seq) == 3
    for i, fl in enumerate(seq):
        ref = farneback_flow(frames[i], frames[i + 1])
        assert np.array_equal(fl.dx, ref.dx) and np.array_equal(fl.dy, ref.dy)


def test_flow_array_round_trip():
    fl = FlowField(np.arange(6.0).reshape(2, 3), -np.arange(6.0).reshape(2, 3))
    back = FlowField.from_array(fl.to_array())
    assert np.array_equal(back.dx, fl.dx) and np.array_equal(back.dy, fl.dy)


def test_ridge_keeps_untextured_background_still():
    rng = np.random.default_rng(7)
    frames = []
    for t in range(2):
        img = np.full((64, 64), 0.2)
        img[:, 20 + 2 * t : 28 + 2 * t] = 0.7
        frames.append(np.clip(img + rng.normal(0, 0.01, img.shape), 0, 1))
    fl = farneback_flow(*frames)
    far = np.abs(np.arange(64) - 25) > 20
    assert np.median(fl.magnitude()[:, far]) < 0.3
    assert abs(np.median(fl.dx[:, 21:29]) - 2) < 0.3
    plain = farneback_flow(*frames, FlowParams(regularization=0.0))
    assert np.median(plain.magnitude()[:, far]) > np.median(fl.magnitude()[:, far])
