"""Monte-Carlo benchmark harness: run estimators on simulated trials and score them.

Every trial simulates once and feeds the same data to every estimator.
A trial in which any estimator fails is dropped from all aggregates, so the
estimators are always compared on a common set of trials; per-estimator
failure counts are reported alongside.

Wall times are kept out of the deterministic part of the report, which is a
pure function of (scenario, estimators, trial count, master seed).
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .gaussian import StepFailure, means, run_ckf, run_cks
from .mcc import KernelConfig
from .robust_filter import RobustFilterConfig, run_rckf
from .robust_smoother import RobustSmootherConfig, run_rcks
from .scenarios import ScenarioSpec, simulate, trial_rng

ESTIMATOR_KINDS = ("ckf", "rckf", "cks", "rcks")
ROBUST_KINDS = ("rckf", "rcks")
FAILURE_ERRORS = (StepFailure, np.linalg.LinAlgError, FloatingPointError)


class EmptyInput(ValueError):
    pass


# -------------------------------------------------------------------- metrics

def trmse(errors) -> float:
    """Time-averaged RMSE: ``mean_t sqrt(mean_i e[i, t]^2)`` for an L x T error matrix."""
    e = np.asarray(errors, dtype=float)
    if e.ndim == 1:
        e = e[None, :]
    if e.size == 0 or e.ndim != 2:
        raise EmptyInput("need an L x T error matrix with L, T >= 1")
    return float(np.mean(np.sqrt(np.mean(e * e, axis=0))))


def _group_rmse(truths, estimates, cols) -> np.ndarray:
    truths = np.asarray(truths, dtype=float)
    estimates = np.asarray(estimates, dtype=float)
    if truths.size == 0 or estimates.size == 0:
        raise EmptyInput("no trajectories")
    if truths.shape != estimates.shape:
        raise ValueError(f"shape mismatch {truths.shape} vs {estimates.shape}")
    if truths.ndim == 2:
        truths, estimates = truths[None], estimates[None]
    d = estimates[..., cols] - truths[..., cols]
    return np.sqrt(np.mean(np.sum(d * d, axis=-1), axis=0))


def rmse_position(truths, estimates) -> np.ndarray:
    """Per-step ``sqrt(mean_i ((a - a_hat)^2 + (b - b_hat)^2))`` over components 0, 1.

    Inputs have shape (L, T, n) or (T, n).
    """
    return _group_rmse(truths, estimates, [0, 1])


def rmse_velocity(truths, estimates) -> np.ndarray:
    """As :func:`rmse_position` over the velocity components 2, 3."""
    return _group_rmse(truths, estimates, [2, 3])


def metric_groups(spec: ScenarioSpec) -> dict[str, list[int]]:
    """Named component groups for per-step RMSE series."""
    if spec.name == "tracking":
        return {"pos": [0, 1], "vel": [2, 3]}
    return {f"x{i + 1}": [i] for i in range(spec.model.n)}


# ----------------------------------------------------------------- estimators

@dataclass(frozen=True)
class EstimatorConfig:
    """One estimator variant. Kernel sizes and HQ settings only matter for robust kinds."""

    kind: str
    sigma: float = 2.0
    eta: float = 2.0
    max_iters: int = 50
    tol: float = 1e-6
    label: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator {self.kind!r}; choose from {ESTIMATOR_KINDS}")
        KernelConfig((self.sigma,), (self.eta,))  # validates bandwidths
        if self.max_iters < 1 or not self.tol > 0:
            raise ValueError("max_iters must be >= 1 and tol > 0")

    @property
    def name(self) -> str:
        return self.label or self.kind.upper()

    def run(self, model, ys) -> tuple[np.ndarray, Optional[float]]:
        """State estimates for t = 1..T and the mean HQ iteration count (robust kinds)."""
        kernel = KernelConfig((self.sigma,), (self.eta,))
        if self.kind == "ckf":
            return np.array([f.mean for f, _ in run_ckf(model, ys)]), None
        if self.kind == "cks":
            return means(run_cks(model, ys))[1:], None
        if self.kind == "rckf":
            cfg = RobustFilterConfig(kernel, convergence_tol=self.tol, max_iters=self.max_iters)
            est, diags = run_rckf(model, ys, cfg)
            return means(est), float(np.mean([d.iterations for d in diags]))
        cfg = RobustSmootherConfig(kernel, convergence_tol=self.tol, max_outer_iters=self.max_iters)
        est, diag = run_rcks(model, ys, cfg)
        return means(est)[1:], float(diag.outer_iterations)


# -------------------------------------------------------------------- reports

@dataclass
class TrialReport:
    trial_index: int
    truth: np.ndarray  # (T+1, n)
    estimates: dict  # name -> (T, n) array, or None on failure
    wall_time: dict  # name -> seconds
    mean_iterations: dict  # name -> float or None
    failures: dict = field(default_factory=dict)  # name -> message

    @property
    def ok(self) -> bool:
        return not self.failures


@dataclass
class MetricsReport:
    scenario: str
    params: dict
    estimators: list
    trials: int
    master_seed: int
    used_trials: int
    excluded_trials: int
    failures: dict  # name -> count
    trmse: dict  # name -> per-component list
    rmse_series: dict  # name -> {metric: list over t}
    time_avg_rmse: dict  # name -> {metric: float}
    mean_iterations: dict  # name -> float or None
    total_time: dict  # name -> seconds (not deterministic)

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "scenario": self.scenario,
            "params": self.params,
            "estimators": self.estimators,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "used_trials": self.used_trials,
            "excluded_trials": self.excluded_trials,
            "failures": self.failures,
            "trmse": self.trmse,
            "time_avg_rmse": self.time_avg_rmse,
            "mean_iterations": self.mean_iterations,
            "rmse_series": self.rmse_series,
        }
        if include_timing:
            out["total_time"] = self.total_time
        return out

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True)

    def csv_rows(self) -> list[tuple]:
        rows = []
        for name, series in self.rmse_series.items():
            for metric, values in series.items():
                rows.extend((t + 1, name, metric, v) for t, v in enumerate(values))
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "estimator", "metric", "value"])
        w.writerows((s, n, m, repr(float(v))) for s, n, m, v in self.csv_rows())
        return buf.getvalue()

    def to_text(self) -> str:
        """Aligned summary: estimator x component TRMSE, time, iterations, failures."""
        names = list(self.trmse)
        ncomp = len(next(iter(self.trmse.values()))) if names else 0
        metrics = list(next(iter(self.time_avg_rmse.values()))) if names else []
        header = ["estimator"] + [f"trmse_x{i + 1}" for i in range(ncomp)]
        header += [f"rmse_{m}" for m in metrics if not m.startswith("x")]
        header += ["time_s", "mean_iters", "failures"]
        lines = [header]
        for name in names:
            row = [name] + [f"{v:.4f}" for v in self.trmse[name]]
            row += [f"{self.time_avg_rmse[name][m]:.4f}" for m in metrics if not m.startswith("x")]
            it = self.mean_iterations[name]
            row += [
                f"{self.total_time.get(name, float('nan')):.2f}",
                "-" if it is None else f"{it:.2f}",
                str(self.failures[name]),
            ]
            lines.append(row)
        widths = [max(len(r[i]) for r in lines) for i in range(len(header))]
        title = (
            f"{self.scenario} {self.params}  trials={self.trials} used={self.used_trials} "
            f"excluded={self.excluded_trials} seed={self.master_seed}"
        )
        body = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in lines]
        return "\n".join([title] + body)


# ----------------------------------------------------------------- execution

def run_trial(spec: ScenarioSpec, estimators: Sequence[EstimatorConfig], master_seed: int, index: int) -> TrialReport:
    traj = simulate(spec, trial_rng(master_seed, index))
    model = spec.model_for(traj)
    estimates, times, iters, failures = {}, {}, {}, {}
    for est in estimators:
        t0 = time.perf_counter()
        try:
            with np.errstate(all="ignore"):
                xs, it = est.run(model, traj.measurements)
            if not np.all(np.isfinite(xs)):
                raise FloatingPointError("non-finite estimate")
        except FAILURE_ERRORS as exc:
            xs, it = None, None
            failures[est.name] = f"{type(exc).__name__}: {exc}"
        times[est.name] = time.perf_counter() - t0
        estimates[est.name] = xs
        iters[est.name] = it
    return TrialReport(index, traj.states, estimates, times, iters, failures)


def _run_chunk(args) -> list[TrialReport]:
    spec, estimators, master_seed, indices = args
    return [run_trial(spec, estimators, master_seed, i) for i in indices]


def run_trials(
    spec: ScenarioSpec,
    estimators: Sequence[EstimatorConfig],
    L: int,
    master_seed: int,
    workers: int = 1,
) -> list[TrialReport]:
    """Run ``L`` trials, optionally over a process pool; results are in trial order."""
    if L < 1:
        raise ValueError("need at least one trial")
    if workers <= 1:
        return [run_trial(spec, estimators, master_seed, i) for i in range(L)]
    chunks = [list(range(L))[w::workers] for w in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, [(spec, list(estimators), master_seed, c) for c in chunks if c]))
    return sorted((r for part in parts for r in part), key=lambda r: r.trial_index)


def aggregate(
    spec: ScenarioSpec,
    estimators: Sequence[EstimatorConfig],
    reports: Sequence[TrialReport],
    master_seed: int,
) -> MetricsReport:
    names = [e.name for e in estimators]
    if len(set(names)) != len(names):
        raise ValueError(f"estimator names must be unique, got {names}")
    used = [r for r in reports if r.ok]
    failures = {n: sum(n in r.failures for r in reports) for n in names}
    groups = metric_groups(spec)
    trm, series, tavg, iters = {}, {}, {}, {}
    truth = np.array([r.truth[1:] for r in used]) if used else None
    for est in estimators:
        n = est.name
        if used:
            xs = np.array([r.estimates[n] for r in used])
            err = xs - truth
            trm[n] = [trmse(err[:, :, i]) for i in range(err.shape[-1])]
            series[n] = {g: _group_rmse(truth, xs, cols).tolist() for g, cols in groups.items()}
            tavg[n] = {g: float(np.mean(v)) for g, v in series[n].items()}
        else:
            trm[n], series[n], tavg[n] = [], {}, {}
        its = [r.mean_iterations[n] for r in used if r.mean_iterations[n] is not None]
        iters[n] = float(np.mean(its)) if its else None
    return MetricsReport(
        scenario=spec.name,
        params=dict(spec.params),
        estimators=[dict(kind=e.kind, name=e.name, sigma=e.sigma, eta=e.eta, max_iters=e.max_iters, tol=e.tol) for e in estimators],
        trials=len(reports),
        master_seed=int(master_seed),
        used_trials=len(used),
        excluded_trials=len(reports) - len(used),
        failures=failures,
        trmse=trm,
        rmse_series=series,
        time_avg_rmse=tavg,
        mean_iterations=iters,
        total_time={n: float(sum(r.wall_time[n] for r in reports)) for n in names},
    )


def run_experiment(
    spec: ScenarioSpec,
    estimators: Sequence[EstimatorConfig],
    L: int,
    master_seed: int,
    workers: int = 1,
) -> MetricsReport:
    """Monte-Carlo comparison of ``estimators`` over ``L`` trials of ``spec``."""
    if not estimators:
        raise ValueError("need at least one estimator")
    reports = run_trials(spec, estimators, L, master_seed, workers)
    return aggregate(spec, estimators, reports, master_seed)


def default_estimators(sigma: float = 2.0, eta: float = 2.0, kinds: Sequence[str] = ESTIMATOR_KINDS, **kw) -> list[EstimatorConfig]:
    return [EstimatorConfig(k, sigma=sigma, eta=eta, **kw) for k in kinds]
