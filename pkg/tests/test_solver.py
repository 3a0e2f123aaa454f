import numpy as np
import pytest

from blindsr.charts import shapes
from blindsr.degrade import DegradationSpec, Iso, degrade, gaussian_kernel
from blindsr.metrics import kernel_l1
from blindsr.operators import unfold_downsampled
from blindsr.prox import TikhonovProx
from blindsr.solver import (DivergenceError, SolverConfig, SolverState, backtracking_step, fidelity,
                            grad_k, grad_x, init, k_step, residual_lr, run, x_step)

from oracles import central_diff, half_fidelity, random_kernel


def delta_kernel(p):
    k = np.zeros((p, p))
    k[p // 2, p // 2] = 1.0
    return k


def gt_instance(rng, size=16, s=2, p=5, sigma=1.0, boundary="circular"):
    x = rng.random((size, size))
    y, k = degrade(x, DegradationSpec(scale=s, kernel_size=p, params=Iso(sigma), boundary=boundary))
    return x, k, y


def test_init_scale_one_is_identity(rng):
    y = rng.random((8, 9))
    st = init(y, SolverConfig(scale=1, kernel_size=5))
    np.testing.assert_allclose(st.x, y, atol=1e-12, rtol=0)
    assert st.t == 0


def test_init_kernel_and_dims(rng):
    y = rng.random((6, 7))
    st = init(y, SolverConfig(scale=3, kernel_size=11))
    assert st.x.shape == (18, 21)
    assert abs(st.k.sum() - 1) < 1e-12
    np.testing.assert_allclose(st.k, np.rot90(st.k), atol=1e-15)
    np.testing.assert_allclose(st.k, gaussian_kernel(11, Iso(11 / 6)), atol=0)


def test_config_validation():
    for bad in [dict(stages=-1), dict(delta_k=-1.0), dict(kernel_size=4), dict(scale=0),
                dict(boundary="reflect")]:
        with pytest.raises(ValueError):
            SolverConfig(**bad)


def test_residual_zero_at_ground_truth(rng):
    x, k, y = gt_instance(rng)
    np.testing.assert_allclose(residual_lr(y, x, k, 2, "circular"), 0, atol=1e-12)


def test_residual_delta_s1(rng):
    x, y = rng.random((6, 6)), rng.random((6, 6))
    np.testing.assert_allclose(residual_lr(y, x, delta_kernel(3), 1), y - x, atol=0)


def test_residual_matches_pipeline(rng):
    x = rng.random((8, 8))
    y = rng.random((4, 4))
    k = random_kernel(rng, 3)
    spec_y, _ = degrade(x, DegradationSpec(scale=2, kernel_size=3, params=Iso(0.9)))
    k9 = gaussian_kernel(3, Iso(0.9))
    np.testing.assert_allclose(residual_lr(y, x, k9, 2), y - spec_y, atol=0)
    assert fidelity(y, x, k, 2) == pytest.approx(half_fidelity(y, x, k, 2, "replicate"), rel=1e-13)


def test_residual_dim_mismatch(rng):
    with pytest.raises(ValueError):
        residual_lr(np.zeros((4, 4)), np.zeros((9, 8)), delta_kernel(3), 2)


@pytest.mark.parametrize("s", [1, 2])
@pytest.mark.parametrize("boundary", ["circular", "replicate", "zero"])
def test_grad_k_finite_difference(rng, s, boundary):
    x = rng.random((8, 8))
    y = rng.random((8 // s, 8 // s))
    k = random_kernel(rng, 3)
    g = grad_k(y, x, k, s, boundary)
    fd = central_diff(lambda kk: half_fidelity(y, x, kk, s, boundary), k)
    np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-9)


@pytest.mark.parametrize("s", [1, 2])
@pytest.mark.parametrize("boundary", ["circular", "replicate", "zero"])
def test_grad_x_finite_difference(rng, s, boundary):
    x = rng.random((8, 8))
    y = rng.random((8 // s, 8 // s))
    k = random_kernel(rng, 3)
    g = grad_x(y, x, k, s, boundary)
    fd = central_diff(lambda xx: half_fidelity(y, xx, k, s, boundary), x)
    np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-9)


def test_grad_k_scalar_closed_form(rng):
    x = rng.random((6, 6))
    y = rng.random((3, 3))
    k = np.array([[0.7]])
    xs = x[::2, ::2]
    expected = np.sum(xs * (xs * 0.7 - y))
    assert grad_k(y, x, k, 2)[0, 0] == pytest.approx(expected, rel=1e-13)


def test_grad_k_matches_materialized(rng):
    x = rng.random((12, 12))
    y = rng.random((6, 6))
    k = random_kernel(rng, 5)
    m = unfold_downsampled(x, 5, 2, "circular")
    r = m @ k.ravel() - y.ravel()
    np.testing.assert_allclose(grad_k(y, x, k, 2, "circular").ravel(), m.T @ r, atol=1e-12, rtol=0)


@pytest.mark.parametrize("boundary", ["circular", "replicate"])
def test_gradients_vanish_at_ground_truth(rng, boundary):
    x, k, y = gt_instance(rng, boundary=boundary)
    np.testing.assert_allclose(grad_k(y, x, k, 2, boundary), 0, atol=1e-10)
    np.testing.assert_allclose(grad_x(y, x, k, 2, boundary), 0, atol=1e-10)


def test_grad_x_delta_s1(rng):
    x, y = rng.random((6, 6)), rng.random((6, 6))
    np.testing.assert_allclose(grad_x(y, x, delta_kernel(3), 1), x - y, atol=1e-15)


def _state(x, k):
    return SolverState(x=np.array(x, dtype=float), k=np.array(k, dtype=float))


def test_k_step_zero_gradient_and_zero_step(rng):
    x, k, y = gt_instance(rng)
    cfg = SolverConfig(scale=2, kernel_size=5, boundary="circular")
    np.testing.assert_allclose(k_step(_state(x, k), y, cfg), k, atol=1e-12)
    k0 = random_kernel(rng, 5)
    cfg0 = SolverConfig(scale=2, kernel_size=5, boundary="circular", delta_k=0.0)
    np.testing.assert_allclose(k_step(_state(x, k0), y, cfg0), k0, atol=1e-12)


def test_k_step_decreases_fidelity_from_perturbed_kernel(rng):
    x, k, y = gt_instance(rng, size=32, p=7)
    k_pert = 0.7 * k + 0.3 * random_kernel(rng, 7)
    cfg = SolverConfig(scale=2, kernel_size=7, boundary="circular")
    st = _state(x, k_pert)
    k_new = k_step(st, y, cfg)
    assert fidelity(y, x, k_new, 2, "circular") < fidelity(y, x, k_pert, 2, "circular")
    assert k_new.min() >= 0 and abs(k_new.sum() - 1) <= 1e-12
    assert st.step_k > 0


def test_x_step_zero_gradient(rng):
    x, k, y = gt_instance(rng)
    cfg = SolverConfig(scale=2, kernel_size=5, boundary="circular")
    np.testing.assert_allclose(x_step(_state(x, k), y, cfg), x, atol=1e-12)


def test_x_step_identity_problem_is_exact(rng):
    x, y = rng.random((6, 6)), rng.random((6, 6))
    cfg = SolverConfig(scale=1, kernel_size=3, boundary="circular", delta_x=1.0)
    np.testing.assert_allclose(x_step(_state(x, delta_kernel(3)), y, cfg), y, atol=1e-15)


def test_x_step_tikhonov_shrinks_constant():
    x = np.full((6, 6), 0.5)
    y = np.full((6, 6), 0.5)
    cfg = SolverConfig(scale=1, kernel_size=3, boundary="circular", delta_x=2.0,
                       image_prox=TikhonovProx(0.25))
    out = x_step(_state(x, delta_kernel(3)), y, cfg)
    np.testing.assert_allclose(out, 0.5 / (1 + 0.25 * 2.0), atol=1e-15)


def test_backtracking_examples():
    f = lambda v: 0.5 * float(np.sum(v * v))
    v = np.array([3.0, -2.0])
    assert backtracking_step(f, v, v, 1.0) == 1.0
    assert backtracking_step(f, v, np.zeros(2), 0.75) == 0.75
    # Ascent direction: every candidate step increases f.
    with pytest.raises(DivergenceError):
        backtracking_step(f, v, -v, 1.0)
    with pytest.raises(DivergenceError):
        backtracking_step(f, v, np.array([np.nan, 0.0]), 1.0)


def test_backtracking_halves_until_armijo():
    f = lambda v: 0.5 * float(np.sum(v * v))
    v = np.array([1.0])
    # f(v - d v) = 0.5 (1-d)^2 must drop below 0.5 - 1e-4 d: holds for d < ~2.
    assert backtracking_step(f, v, v, 8.0) == 1.0
    assert backtracking_step(f, v, v, 3.0) == 1.5


def test_run_zero_stages(rng):
    y = rng.random((8, 8))
    cfg = SolverConfig(stages=0, scale=2, kernel_size=5)
    st = run(y, cfg)
    ref = init(y, cfg)
    np.testing.assert_array_equal(st.x, ref.x)
    np.testing.assert_array_equal(st.k, ref.k)
    assert st.t == 0 and len(st.trace) == 1


def test_run_fixed_point_at_ground_truth(rng):
    x, k, y = gt_instance(rng)
    cfg = SolverConfig(stages=10, scale=2, kernel_size=5, boundary="circular")
    st = run(y, cfg, x0=x, k0=k)
    np.testing.assert_allclose(st.x, x, atol=1e-9)
    np.testing.assert_allclose(st.k, k, atol=1e-9)


def test_run_fixed_kernel_descends(rng):
    x = shapes(32, seed=3)
    y, k = degrade(x, DegradationSpec(scale=2, kernel_size=7, params=Iso(1.2)))
    cfg = SolverConfig(stages=50, scale=2, kernel_size=7, update_kernel=False)
    st = run(y, cfg, k0=k)
    f = [row["fidelity"] for row in st.trace]
    assert len(f) == 51
    assert all(b <= a for a, b in zip(f, f[1:]))
    assert f[-1] < 0.1 * f[0]


def test_run_substeps_descend_and_kernel_feasible(rng):
    x = shapes(32, seed=4)
    y, _ = degrade(x, DegradationSpec(scale=2, kernel_size=7, params=Iso(1.0)))
    st = run(y, SolverConfig(stages=15, scale=2, kernel_size=7, keep_history=True))
    prev = st.trace[0]["fidelity"]
    for row in st.trace[1:]:
        assert row["fidelity_k"] <= prev
        assert row["fidelity"] <= row["fidelity_k"]
        prev = row["fidelity"]
    assert len(st.history) == 15
    for kk, _ in st.history:
        assert kk.min() >= 0 and abs(kk.sum() - 1) <= 1e-9


def test_run_blind_reduces_kernel_error():
    x = shapes(64, seed=0)
    y, k = degrade(x, DegradationSpec(scale=2, kernel_size=11, params=Iso(1.2), noise=0))
    st = run(y, SolverConfig(stages=19, scale=2, kernel_size=11), ground_truth=(x, k))
    assert st.trace[-1]["kernel_l1"] < st.trace[0]["kernel_l1"]
    assert st.trace[0]["kernel_l1"] == pytest.approx(kernel_l1(gaussian_kernel(11, Iso(11 / 6)), k))
    assert {"stage", "fidelity", "kernel_change", "psnr", "kernel_l1"} <= set(st.trace[-1])


def test_run_divergence_reports_stage(rng):
    y = rng.random((8, 8))
    cfg = SolverConfig(stages=5, scale=2, kernel_size=3, delta_x=1e300)
    with pytest.raises(DivergenceError) as info:
        run(y, cfg)
    assert info.value.stage == 1
    assert info.value.state is not None
    assert np.all(np.isfinite(info.value.state.x))


def test_run_callback_and_dims(rng):
    y = rng.random((5, 6, 3))
    seen = []
    st = run(y, SolverConfig(stages=3, scale=2, kernel_size=3), callback=lambda s: seen.append(s.t))
    assert seen == [1, 2, 3]
    assert st.x.shape == (10, 12, 3)
