import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_cubature.gaussian import (
    StateEstimate,
    StateSpaceModel,
    ckf_predict,
    ckf_update,
    means,
    run_ckf,
)
from robust_cubature.mcc import KernelConfig
from robust_cubature.robust_filter import (
    RobustFilterConfig,
    relative_change,
    rckf_update,
    run_rckf,
)
from robust_cubature.scenarios import (
    MixedGaussianNoise,
    random_affine_model,
    random_spd,
    sample_mixed_gaussian,
    simulate,
    trial_rng,
    vpo_scenario,
)


def scalar_model(R=1.0):
    return StateSpaceModel(
        f=lambda X: X, h=lambda X: X, Q=[[1.0]], R=[[R]], prior=StateEstimate([0.0], [[1.0]])
    )


def test_first_iteration_equals_ckf_update():
    rng = np.random.default_rng(0)
    for _ in range(100):
        am = random_affine_model(rng, 3, 2)
        model = am.as_state_space()
        pred = StateEstimate(rng.standard_normal(3), random_spd(rng, 3), 1)
        y = rng.standard_normal(2) * 5
        cfg = RobustFilterConfig(KernelConfig((2.0,), (2.0,)), max_iters=1)
        robust, diag = rckf_update(pred, y, model, cfg)
        plain, _ = ckf_update(pred, y, model)
        assert diag.iterations == 1
        np.testing.assert_allclose(robust.mean, plain.mean, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(robust.cov, plain.cov, rtol=1e-12, atol=1e-12)


def test_outlier_correction_shrinks():
    model = scalar_model()
    pred = StateEstimate([0.0], [[1.0]], 1)
    plain, _ = ckf_update(pred, [20.0], model)
    assert plain.mean[0] == pytest.approx(10.0)
    robust, diag = rckf_update(pred, [20.0], model, RobustFilterConfig(KernelConfig((20.0,), (2.0,))))
    assert abs(robust.mean[0]) < 10.0
    assert abs(robust.mean[0]) < 1.0
    assert diag.iterations >= 2


def test_equal_bandwidths_symmetric_conflict_is_fixed_point():
    model = scalar_model()
    cfg = RobustFilterConfig(KernelConfig((2.0,), (2.0,)))
    robust, _ = rckf_update(StateEstimate([0.0], [[1.0]], 1), [20.0], model, cfg)
    assert robust.mean[0] == pytest.approx(10.0)


def test_large_bandwidth_matches_ckf():
    spec = vpo_scenario(0.0, 0.0)
    cfg = RobustFilterConfig(KernelConfig((1e6,), (1e6,)))
    for i in range(10):
        tr = simulate(spec, trial_rng(7, i))
        model = spec.model_for(tr)
        robust, _ = run_rckf(model, tr.measurements, cfg)
        plain = [f for f, _ in run_ckf(model, tr.measurements)]
        for a, b in zip(robust, plain):
            assert relative_change(a.mean, b.mean) <= 1e-6


def random_linear_update(rng):
    """Affine model, prediction, and a measurement with mixture outliers."""
    am = random_affine_model(rng, 3, 2)
    pred = StateEstimate(rng.standard_normal(3), random_spd(rng, 3), 1)
    x = pred.mean + np.linalg.cholesky(pred.cov) @ rng.standard_normal(3)
    v, _ = sample_mixed_gaussian(MixedGaussianNoise(am.R, 0.5, 50.0), rng)
    return am.as_state_space(), pred, am.H @ x + am.c + v


def test_objective_monotone_on_linear_measurement():
    rng = np.random.default_rng(1)
    cfg = RobustFilterConfig(KernelConfig((2.0,), (2.0,)), safeguard=False, convergence_tol=1e-10)
    checked = 0
    for _ in range(100):
        model, pred, y = random_linear_update(rng)
        _, diag = rckf_update(pred, y, model, cfg)
        obj = np.array(diag.objective_history)
        assert np.all(np.diff(obj) >= -1e-10 * np.maximum(1.0, np.abs(obj[:-1])))
        checked += len(obj) - 1
    assert checked > 50


def test_objective_monotone_with_safeguard_on_vpo():
    spec = vpo_scenario(0.0, 0.2)
    cfg = RobustFilterConfig(KernelConfig((2.0,), (2.0,)))
    steps = ups = 0
    for i in range(5):
        tr = simulate(spec, trial_rng(3, i))
        model = spec.model_for(tr)
        post = model.prior
        for t, y in enumerate(tr.measurements, start=1):
            pred = ckf_predict(post, model)
            try:
                post, diag = rckf_update(pred, y, model, cfg)
            except (np.linalg.LinAlgError, FloatingPointError):
                break
            obj = diag.objective_history
            if diag.stop_reason == "objective_decrease":
                obj = obj[:-1]  # rejected iterate
            d = np.diff(obj)
            steps += d.size
            ups += int(np.sum(d >= -1e-9 * np.maximum(1.0, np.abs(obj[:-1]))))
    assert steps > 0
    assert ups == steps


def test_weights_bounded_and_convergence_recorded():
    spec = vpo_scenario(0.0, 0.2)
    tr = simulate(spec, trial_rng(5, 0))
    cfg = RobustFilterConfig(KernelConfig((2.0,), (2.0,)))
    _, diags = run_rckf(spec.model_for(tr), tr.measurements, cfg)
    for d in diags:
        assert d.iterations <= cfg.max_iters
        for w in (d.final_p.p, d.final_p.q):
            assert np.all(w >= -1.0) and np.all(w <= -cfg.weight_floor)
        assert np.all(np.isfinite(d.relative_change_history))
        if d.converged:
            assert d.relative_change_history[-1] <= cfg.convergence_tol
    assert np.mean([d.iterations for d in diags]) <= 10


def test_max_iters_reported_not_raised():
    model = scalar_model()
    cfg = RobustFilterConfig(KernelConfig((20.0,), (2.0,)), max_iters=2, convergence_tol=1e-15)
    _, diag = rckf_update(StateEstimate([0.0], [[1.0]], 1), [20.0], model, cfg)
    assert diag.iterations == 2
    assert not diag.converged
    assert diag.stop_reason == "max_iters"


def test_posterior_cov_spd():
    model = scalar_model()
    post, _ = rckf_update(
        StateEstimate([0.0], [[1.0]], 1), [50.0], model, RobustFilterConfig(KernelConfig((2.0,), (2.0,)))
    )
    assert post.cov[0, 0] > 0


def test_relative_change_guard():
    assert relative_change(np.array([3.0, 4.0]), np.zeros(2)) == pytest.approx(5.0)
    assert relative_change(np.array([2.0]), np.array([1.0])) == pytest.approx(1.0)


def test_config_validation():
    k = KernelConfig((1.0,), (1.0,))
    with pytest.raises(ValueError):
        RobustFilterConfig(k, convergence_tol=0.0)
    with pytest.raises(ValueError):
        RobustFilterConfig(k, max_iters=0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s=st.sampled_from([0.5, 2.0, 20.0]))
def test_scalar_iterate_between_prior_and_measurement(seed, s):
    rng = np.random.default_rng(seed)
    model = scalar_model(R=rng.uniform(0.5, 2.0))
    pred = StateEstimate([0.0], [[rng.uniform(0.5, 2.0)]], 1)
    y = rng.uniform(-30, 30)
    robust, _ = rckf_update(pred, [y], model, RobustFilterConfig(KernelConfig((s,), (2.0,))))
    assert 0.0 <= robust.mean[0] / y <= 1.0
    assert 0.0 < robust.cov[0, 0] <= pred.cov[0, 0] / 1e-8
