import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from blindsr.prox import (IdentityProx, SimplexProjection, TikhonovProx, TVProx, make_image_prox,
                          prox_simplex, tv_denoise)

from oracles import grid_simplex_projection_3, simplex_kkt_residual


def test_simplex_symmetric_point():
    np.testing.assert_allclose(prox_simplex([0.5, 0.5, 0.5]), [1 / 3] * 3, atol=1e-15)


def test_simplex_feasible_unchanged(rng):
    for _ in range(20):
        v = rng.dirichlet(np.ones(9))
        np.testing.assert_allclose(prox_simplex(v), v, atol=1e-12)


def test_simplex_worked_example():
    u = prox_simplex([1.2, -0.1, 0.3])
    np.testing.assert_allclose(u, [0.95, 0.0, 0.05], atol=1e-12)
    np.testing.assert_allclose(grid_simplex_projection_3([1.2, -0.1, 0.3]), u, atol=1e-3)
    assert simplex_kkt_residual([1.2, -0.1, 0.3], u) <= 1e-12


@pytest.mark.parametrize("trial", range(10))
def test_simplex_matches_grid_oracle(rng, trial):
    v = rng.normal(0.3, 0.8, size=3)
    np.testing.assert_allclose(prox_simplex(v), grid_simplex_projection_3(v), atol=2e-3)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 60), elements=st.floats(-50, 50)))
def test_simplex_kkt_and_idempotent(v):
    u = prox_simplex(v)
    assert u.min() >= 0
    assert abs(u.sum() - 1) <= 1e-12
    assert simplex_kkt_residual(v, u) <= 1e-9
    np.testing.assert_allclose(prox_simplex(u), u, atol=1e-12)


def test_simplex_keeps_shape(rng):
    v = rng.standard_normal((5, 5))
    u = prox_simplex(v)
    assert u.shape == (5, 5)
    assert abs(u.sum() - 1) <= 1e-12
    np.testing.assert_array_equal(SimplexProjection()(v, 123.0), u)


def test_simplex_nonexpansive(rng):
    for _ in range(50):
        a, b = rng.standard_normal(16), rng.standard_normal(16)
        assert np.linalg.norm(prox_simplex(a) - prox_simplex(b)) <= np.linalg.norm(a - b) + 1e-12


def test_identity_prox(rng):
    v = rng.random((4, 4))
    np.testing.assert_array_equal(IdentityProx()(v, 0.7), v)


def test_tikhonov_closed_form():
    v = np.full((6, 6), 0.8)
    np.testing.assert_allclose(TikhonovProx(0.5)(v, 2.0), 0.8 / 2.0, atol=1e-15)
    with pytest.raises(ValueError):
        TikhonovProx(-1)


def test_tikhonov_is_prox_of_ridge(rng):
    # u minimizes 0.5||u - v||^2 + step*tau/2 ||u||^2: the gradient vanishes at u.
    v = rng.standard_normal(10)
    tau, step = 0.3, 1.7
    u = TikhonovProx(tau)(v, step)
    np.testing.assert_allclose(u - v + step * tau * u, 0, atol=1e-14)


def test_tv_zero_weight_and_constant(rng):
    v = rng.random((8, 8))
    np.testing.assert_array_equal(tv_denoise(v, 0.0), v)
    c = np.full((8, 8), 0.3)
    np.testing.assert_allclose(TVProx(0.1)(c, 1.0), c, atol=1e-14)


def test_tv_reduces_total_variation_and_preserves_mean(rng):
    v = rng.random((16, 16))
    u = tv_denoise(v, 0.1, n_iter=100)

    def tv(a):
        return np.abs(np.diff(a, axis=0)).sum() + np.abs(np.diff(a, axis=1)).sum()

    assert tv(u) < tv(v)
    assert u.mean() == pytest.approx(v.mean(), abs=1e-12)


def test_tv_nonexpansive(rng):
    prox = TVProx(0.05, inner_iters=200)
    for _ in range(5):
        a, b = rng.random((10, 10)), rng.random((10, 10))
        assert np.linalg.norm(prox(a, 1.0) - prox(b, 1.0)) <= np.linalg.norm(a - b) * (1 + 1e-3)


def test_tv_colour_is_per_channel(rng):
    v = rng.random((8, 8, 3))
    u = tv_denoise(v, 0.05)
    for c in range(3):
        np.testing.assert_allclose(u[..., c], tv_denoise(v[..., c], 0.05), atol=0)


def test_make_image_prox():
    assert isinstance(make_image_prox("identity"), IdentityProx)
    assert make_image_prox("tikhonov", 0.2).tau == 0.2
    tv = make_image_prox("tv", 0.1, 7)
    assert tv.params() == {"tau": 0.1, "inner_iters": 7}
    with pytest.raises(ValueError):
        make_image_prox("bm3d")
