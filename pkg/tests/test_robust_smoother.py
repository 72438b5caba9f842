import numpy as np
import pytest

from robust_cubature.gaussian import StateEstimate, StateSpaceModel, StepFailure, means, run_cks
from robust_cubature.mcc import KernelConfig
from robust_cubature.robust_filter import relative_change
from robust_cubature.robust_smoother import (
    RobustSmootherConfig,
    SmootherIterationState,
    reweighted_model,
    run_rcks,
    smoother_residuals,
)
from robust_cubature.scenarios import (
    random_affine_model,
    simulate,
    trial_rng,
    vpo_scenario,
)

K2 = KernelConfig((2.0,), (2.0,))


def scalar_walk(Q=4.0):
    return StateSpaceModel(
        f=lambda X: X, h=lambda X: X, Q=[[Q]], R=[[1.0]], prior=StateEstimate([0.0], [[1.0]])
    )


def test_residuals_zero_on_consistent_trajectory():
    model = scalar_walk()
    xs = np.zeros((4, 1))
    res = smoother_residuals(xs, model, np.zeros(3))
    for r in res:
        assert np.all(r.alpha == 0.0)
        assert np.all(r.beta == 0.0)


def test_residuals_whitening_arithmetic():
    model = scalar_walk(Q=4.0)
    xs = np.array([[0.0], [2.0]])
    res = smoother_residuals(xs, model, [2.0])
    np.testing.assert_allclose(res[1].alpha, [1.0])
    np.testing.assert_allclose(res[1].beta, [0.0])


def test_residuals_boundary_T0():
    res = smoother_residuals(np.array([[3.0]]), scalar_walk(), np.zeros(0))
    assert len(res) == 1
    np.testing.assert_allclose(res[0].alpha, [3.0])


def test_residual_uses_transition_not_measurement():
    model = StateSpaceModel(
        f=lambda X: 2 * X, h=lambda X: 5 * X, Q=[[1.0]], R=[[1.0]], prior=StateEstimate([1.0], [[1.0]])
    )
    res = smoother_residuals(np.array([[1.0], [2.0]]), model, [10.0])
    np.testing.assert_allclose(res[1].alpha, [0.0])


def test_identity_weights_return_nominal_model():
    model = scalar_walk()
    assert reweighted_model(model, SmootherIterationState.identity(3, 1, 1)) is model


def test_reweighted_model_stacks():
    model = scalar_walk(Q=1.0)
    w = SmootherIterationState(psi=np.array([[0.5], [0.25], [1.0]]), phi=np.array([[0.1], [1.0]]))
    mb = reweighted_model(model, w)
    np.testing.assert_allclose(mb.prior.cov, [[2.0]])
    np.testing.assert_allclose(mb.Q[:, 0, 0], [4.0, 1.0])
    np.testing.assert_allclose(mb.R[:, 0, 0], [10.0, 1.0])


def test_first_outer_iteration_equals_cks():
    spec = vpo_scenario(0.0, 0.2)
    cfg = RobustSmootherConfig(K2, max_outer_iters=1)
    for i in range(10):
        tr = simulate(spec, trial_rng(11, i))
        model = spec.model_for(tr)
        robust, diag = run_rcks(model, tr.measurements, cfg)
        np.testing.assert_array_equal(means(robust), means(run_cks(model, tr.measurements)))
        assert diag.outer_iterations == 1


def test_large_bandwidth_matches_cks():
    spec = vpo_scenario(0.0, 0.0)
    cfg = RobustSmootherConfig(KernelConfig((1e6,), (1e6,)))
    for i in range(10):
        tr = simulate(spec, trial_rng(12, i))
        model = spec.model_for(tr)
        robust, _ = run_rcks(model, tr.measurements, cfg)
        plain = run_cks(model, tr.measurements)
        for a, b in zip(robust[1:], plain[1:]):
            assert relative_change(a.mean, b.mean) <= 1e-6


def _linear_with_outliers(seed, T=40):
    rng = np.random.default_rng(seed)
    am = random_affine_model(rng, 2, 1)
    xs, ys = am.simulate(T, rng)
    hit = rng.random(T) < 0.2
    ys = ys + hit[:, None] * rng.standard_normal((T, 1)) * 7.0 * np.sqrt(am.R[0, 0])
    return am, xs, ys


@pytest.mark.parametrize("seed", range(10))
def test_objective_monotone_on_linear_model(seed):
    am, _, ys = _linear_with_outliers(seed)
    cfg = RobustSmootherConfig(K2, safeguard=False, convergence_tol=1e-10)
    _, diag = run_rcks(am.as_state_space(), ys, cfg)
    obj = np.array(diag.objective_history)
    assert len(obj) >= 2
    assert np.all(np.diff(obj) >= -1e-10 * np.maximum(1.0, np.abs(obj[:-1])))


def test_linear_outliers_improve_over_rts():
    err_r = err_c = 0.0
    for seed in range(10):
        am, xs, ys = _linear_with_outliers(100 + seed)
        model = am.as_state_space()
        robust, _ = run_rcks(model, ys, RobustSmootherConfig(K2))
        err_r += np.sum((means(robust) - xs) ** 2)
        err_c += np.sum((means(run_cks(model, ys)) - xs) ** 2)
    assert err_r < err_c


def test_boundary_agreement_and_weight_bounds():
    spec = vpo_scenario(0.0, 0.2)
    tr = simulate(spec, trial_rng(13, 0))
    cfg = RobustSmootherConfig(K2)
    sm, diag = run_rcks(spec.model_for(tr), tr.measurements, cfg)
    assert len(sm) == spec.T + 1
    np.testing.assert_array_equal(sm[-1].mean, diag.filtered_last[-1].mean)
    for w in (diag.weights.psi, diag.weights.phi):
        assert np.all(w >= cfg.weight_floor) and np.all(w <= 1.0)
    if diag.converged:
        assert diag.change_history[-1] <= cfg.convergence_tol


def test_per_step_kernels():
    model = scalar_walk()
    ys = np.array([0.1, 0.3, 9.0])
    per_step = [KernelConfig((2.0,), (2.0,))] * 4
    a, _ = run_rcks(model, ys, RobustSmootherConfig(per_step))
    b, _ = run_rcks(model, ys, RobustSmootherConfig(K2))
    np.testing.assert_array_equal(means(a), means(b))
    with pytest.raises(ValueError):
        run_rcks(model, ys, RobustSmootherConfig(per_step[:2]))


def test_inner_failure_carries_outer_iteration():
    model = StateSpaceModel(
        f=lambda X: X,
        h=lambda X: np.where(np.abs(X) > 1e3, np.nan, X),
        Q=[[1.0]],
        R=[[1.0]],
        prior=StateEstimate([0.0], [[1.0]]),
    )
    cfg = RobustSmootherConfig(K2, safeguard=False)
    with pytest.raises(StepFailure) as info:
        run_rcks(model, [0.0, 0.0, 5e3], cfg)
    assert info.value.outer_iteration is not None and info.value.outer_iteration >= 1


def test_config_validation():
    with pytest.raises(ValueError):
        RobustSmootherConfig(K2, convergence_tol=-1.0)
    with pytest.raises(ValueError):
        RobustSmootherConfig(K2, max_outer_iters=0)
