"""Maximum-correntropy robust cubature Kalman filter (RCKF).

Each step runs a plain cubature prediction and then alternates two moves
until the state iterate stops changing:

* x-step: a cubature Kalman update with ``P`` and ``R`` inflated by the
  current HQ weights;
* weight step: ``p = -kappa(alpha)``, ``q = -kappa(beta)`` from the whitened
  residuals at the new iterate.

The correntropy objective can only increase along exact HQ iterations. With
``safeguard=True`` an iterate that lowers it, or whose inner update fails
numerically, is rejected and the loop stops at the previous iterate. This
happens when heavy inflation pushes the cubature points far outside the
region where the x-step approximates the weighted problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .gaussian import (
    ResidualFn,
    StateEstimate,
    StateSpaceModel,
    StepFailure,
    _as_measurements,
    _check_finite,
    measurement_update,
    predict_with_cross,
)
from .linalg import spd_sqrt
from .mcc import (
    DEFAULT_WEIGHT_FLOOR,
    HQWeights,
    KernelConfig,
    correntropy_objective,
    normalized_residuals_filter,
    reweight_covariance,
    weight_diagonal,
)

ABS_CHANGE_SWITCH = 1e-12
OBJECTIVE_SLACK = 1e-9

INNER_ERRORS = (np.linalg.LinAlgError, FloatingPointError)


@dataclass(frozen=True)
class RobustFilterConfig:
    kernel: KernelConfig
    convergence_tol: float = 1e-6
    max_iters: int = 50
    weight_floor: float = DEFAULT_WEIGHT_FLOOR
    safeguard: bool = True

    def __post_init__(self):
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.weight_floor > 0:
            raise ValueError("weight_floor must be positive")


@dataclass
class RobustStepDiagnostics:
    iterations: int
    final_p: HQWeights
    converged: bool
    relative_change_history: list = field(default_factory=list)
    objective_history: list = field(default_factory=list)
    stop_reason: str = "tol"  # "tol", "max_iters", "objective_decrease", "inner_failure"


def objective_decreased(new: float, old: float) -> bool:
    return new < old - OBJECTIVE_SLACK * max(1.0, abs(old))


def relative_change(new: np.ndarray, old: np.ndarray) -> float:
    """``||new - old|| / ||old||``, or the absolute change when ``||old||`` is ~0."""
    num = float(np.linalg.norm(new - old))
    den = float(np.linalg.norm(old))
    return num if den < ABS_CHANGE_SWITCH else num / den


def rckf_update(
    pred: StateEstimate,
    y: np.ndarray,
    model: StateSpaceModel,
    cfg: RobustFilterConfig,
    residual_fn: Optional[ResidualFn] = None,
) -> tuple[StateEstimate, RobustStepDiagnostics]:
    """HQ-iterated measurement update.

    The first pass uses unit weights and therefore reproduces the plain CKF
    update. The returned covariance is ``Pbar - K Pyy K^T`` from the last pass.
    """
    residual_fn = residual_fn or model.residual
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (model.m,):
        raise ValueError(f"measurement has shape {y.shape}, expected ({model.m},)")
    n, m = model.n, model.m
    sigma = cfg.kernel.sigma_array(n)
    eta = cfg.kernel.eta_array(m)
    R = model.meas_cov(pred.t)
    SP = spd_sqrt(pred.cov)
    SR = spd_sqrt(R)

    psi = np.ones(n)
    phi = np.ones(m)
    x_acc = P_acc = None
    changes: list[float] = []
    objectives: list[float] = []
    stop_reason = "max_iters"
    for k in range(1, cfg.max_iters + 1):
        try:
            P_bar = reweight_covariance(pred.cov, psi, cfg.weight_floor, chol=SP)
            R_bar = reweight_covariance(R, phi, cfg.weight_floor, chol=SR)
            x_k, P_k, _ = measurement_update(pred.mean, P_bar, y, R_bar, model, residual_fn)
            if not np.all(np.isfinite(x_k)):
                raise FloatingPointError("state iterate became non-finite")
        except INNER_ERRORS:
            if not cfg.safeguard or x_acc is None:
                raise
            stop_reason = "inner_failure"
            break
        res = normalized_residuals_filter(x_k, pred, y, model, residual_fn, chol_P=SP, chol_R=SR)
        objectives.append(correntropy_objective(res, sigma, eta))
        if cfg.safeguard and x_acc is not None and objective_decreased(objectives[-1], objectives[-2]):
            stop_reason = "objective_decrease"
            break
        psi = weight_diagonal(res.alpha, sigma, cfg.weight_floor)
        phi = weight_diagonal(res.beta, eta, cfg.weight_floor)
        x_prev, x_acc, P_acc = x_acc, x_k, P_k
        if x_prev is not None:
            changes.append(relative_change(x_acc, x_prev))
            if changes[-1] <= cfg.convergence_tol:
                stop_reason = "tol"
                break
    diag = RobustStepDiagnostics(
        iterations=k,
        final_p=HQWeights(p=-psi, q=-phi),
        converged=stop_reason == "tol",
        relative_change_history=changes,
        objective_history=objectives,
        stop_reason=stop_reason,
    )
    return StateEstimate(x_acc, P_acc, pred.t), diag


def run_rckf(
    model: StateSpaceModel,
    ys,
    cfg: RobustFilterConfig,
    residual_fn: Optional[ResidualFn] = None,
) -> tuple[list[StateEstimate], list[RobustStepDiagnostics]]:
    """Robust filter over a measurement sequence; returns estimates for t = 1..T."""
    ys = _as_measurements(ys, model.m)
    post = StateEstimate(model.prior.mean, model.prior.cov, 0)
    estimates, diags = [], []
    for t in range(1, ys.shape[0] + 1):
        try:
            pred, _ = predict_with_cross(post, model)
            post, d = rckf_update(pred, ys[t - 1], model, cfg, residual_fn)
            _check_finite(post)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            raise StepFailure(t, exc) from exc
        estimates.append(post)
        diags.append(d)
    return estimates, diags
