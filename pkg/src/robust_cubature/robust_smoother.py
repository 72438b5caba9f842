"""Maximum-correntropy robust cubature Kalman smoother (RCKS).

The outer loop alternates a full CKS pass on a reweighted model
(``Qbar_{t-1}``, ``Rbar_t``, ``Pbar_0``) with an HQ weight refresh computed
from the whitened residuals of the smoothed trajectory.

As in the filter, ``safeguard=True`` stops the outer loop at the last
accepted pass when a new pass lowers the correntropy objective or its inner
CKS fails numerically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .gaussian import (
    ResidualFn,
    StateEstimate,
    StateSpaceModel,
    StepFailure,
    _as_measurements,
    backward_pass,
    forward_pass,
    means,
)
from .linalg import spd_sqrt
from .mcc import (
    DEFAULT_WEIGHT_FLOOR,
    KernelConfig,
    NormalizedResiduals,
    gaussian_kernel,
    reweight_covariance,
)
from .robust_filter import INNER_ERRORS, objective_decreased, relative_change


@dataclass(frozen=True)
class RobustSmootherConfig:
    """``kernel`` is one KernelConfig broadcast over time, or one per step t = 0..T."""

    kernel: Union[KernelConfig, Sequence[KernelConfig]]
    convergence_tol: float = 1e-6
    max_outer_iters: int = 50
    weight_floor: float = DEFAULT_WEIGHT_FLOOR
    safeguard: bool = True

    def __post_init__(self):
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be positive")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if not self.weight_floor > 0:
            raise ValueError("weight_floor must be positive")

    def bandwidths(self, T: int, n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
        """``sigma`` with shape (T+1, n) and ``eta`` with shape (T, m)."""
        if isinstance(self.kernel, KernelConfig):
            sig = np.tile(self.kernel.sigma_array(n), (T + 1, 1))
            eta = np.tile(self.kernel.eta_array(m), (T, 1))
            return sig, eta
        if len(self.kernel) != T + 1:
            raise ValueError(f"need {T + 1} per-step kernels, got {len(self.kernel)}")
        sig = np.array([k.sigma_array(n) for k in self.kernel])
        eta = np.array([k.eta_array(m) for k in self.kernel[1:]])
        return sig, eta


@dataclass
class SmootherIterationState:
    """Positive weight diagonals: ``psi[0]`` reweights P0, ``psi[t]`` reweights
    ``Q_{t-1}``, ``phi[t-1]`` reweights ``R_t``."""

    psi: np.ndarray  # (T+1, n)
    phi: np.ndarray  # (T, m)

    @classmethod
    def identity(cls, T: int, n: int, m: int) -> "SmootherIterationState":
        return cls(psi=np.ones((T + 1, n)), phi=np.ones((T, m)))

    def is_identity(self) -> bool:
        return bool(np.all(self.psi == 1.0) and np.all(self.phi == 1.0))


@dataclass
class RobustSmootherDiagnostics:
    outer_iterations: int
    converged: bool
    weights: SmootherIterationState
    change_history: list = field(default_factory=list)
    objective_history: list = field(default_factory=list)
    filtered_last: list = field(default_factory=list)
    stop_reason: str = "tol"


def _stack(cov: np.ndarray, T: int) -> np.ndarray:
    return cov if cov.ndim == 3 else np.broadcast_to(cov, (T,) + cov.shape)


def _whiten_rows(covs: np.ndarray, resid: np.ndarray) -> np.ndarray:
    """Whiten row ``t`` of ``resid`` with the Cholesky factor of ``covs[t]``."""
    if covs.ndim == 2:
        S = spd_sqrt(covs)
        return np.linalg.solve(S, resid.T).T
    S = np.linalg.cholesky(covs)
    return np.linalg.solve(S, resid[..., None])[..., 0]


def smoother_residuals(
    xs: np.ndarray,
    model: StateSpaceModel,
    ys,
    residual_fn: Optional[ResidualFn] = None,
) -> list[NormalizedResiduals]:
    """Whitened residuals of a trajectory ``x_{0:T}`` under the nominal model.

    ``alpha_0 = P0^{-1/2}(x_0 - xhat_0)``, ``alpha_t = Q_{t-1}^{-1/2}(x_t - f(x_{t-1}))``,
    ``beta_t = R_t^{-1/2} r(y_t, h(x_t))``. Entry 0 has an empty ``beta``.
    """
    residual_fn = residual_fn or model.residual
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    T = xs.shape[0] - 1
    alpha0 = np.linalg.solve(spd_sqrt(model.prior.cov), xs[0] - model.prior.mean)
    out = [NormalizedResiduals(alpha=alpha0, beta=np.zeros(0))]
    if T == 0:
        return out
    ys = _as_measurements(ys, model.m)
    if ys.shape[0] != T:
        raise ValueError(f"trajectory has {T + 1} states but {ys.shape[0]} measurements")
    proc = xs[1:] - model.apply_f(xs[:-1])
    meas = np.array([residual_fn(ys[t], yh) for t, yh in enumerate(model.apply_h(xs[1:]))])
    alpha = _whiten_rows(model.Q, proc)
    beta = _whiten_rows(model.R, meas)
    out.extend(NormalizedResiduals(alpha=a, beta=b) for a, b in zip(alpha, beta))
    return out


def reweighted_model(
    model: StateSpaceModel, weights: SmootherIterationState, floor: float = DEFAULT_WEIGHT_FLOOR
) -> StateSpaceModel:
    """Model with ``Pbar_0``, ``Qbar_{t-1}``, ``Rbar_t`` built from the weight diagonals."""
    if weights.is_identity():
        return model
    T = weights.phi.shape[0]

    def stack(covs, w):
        covs = _stack(covs, T)
        S = np.linalg.cholesky(covs)
        Ss = S / np.sqrt(np.maximum(w, floor))[:, None, :]
        out = Ss @ np.swapaxes(Ss, -1, -2)
        return 0.5 * (out + np.swapaxes(out, -1, -2))

    P0 = reweight_covariance(model.prior.cov, weights.psi[0], floor)
    prior = StateEstimate(model.prior.mean, P0, 0)
    return model.replace(Q=stack(model.Q, weights.psi[1:]), R=stack(model.R, weights.phi), prior=prior)


def _objective(res: list[NormalizedResiduals], sig: np.ndarray, eta: np.ndarray) -> float:
    alpha = np.array([r.alpha for r in res])
    total = np.sum(sig**2 * gaussian_kernel(alpha, sig))
    if len(res) > 1:
        beta = np.array([r.beta for r in res[1:]])
        total += np.sum(eta**2 * gaussian_kernel(beta, eta))
    return float(total)


def run_rcks(
    model: StateSpaceModel,
    ys,
    cfg: RobustSmootherConfig,
    residual_fn: Optional[ResidualFn] = None,
) -> tuple[list[StateEstimate], RobustSmootherDiagnostics]:
    """Robust smoother; returns smoothed estimates for t = 0..T and diagnostics.

    Outer iteration 1 uses unit weights and is exactly the plain CKS.
    Convergence: ``max_t ||x^k_t - x^{k-1}_t|| / ||x^{k-1}_t|| <= tol`` over t = 1..T.
    """
    ys = _as_measurements(ys, model.m)
    T, n, m = ys.shape[0], model.n, model.m
    sig, eta = cfg.bandwidths(T, n, m)
    weights = SmootherIterationState.identity(T, n, m)
    accepted = None  # (smoothed, filtered, means)
    changes: list[float] = []
    objectives: list[float] = []
    stop_reason = "max_iters"
    for k in range(1, cfg.max_outer_iters + 1):
        mbar = reweighted_model(model, weights, cfg.weight_floor)
        try:
            filtered, predicted, crosses = forward_pass(mbar, ys, residual_fn)
            smoothed = backward_pass(mbar, filtered, predicted, crosses)
        except StepFailure as exc:
            if cfg.safeguard and accepted is not None and isinstance(exc.cause, INNER_ERRORS):
                stop_reason = "inner_failure"
                break
            raise StepFailure(exc.t, exc.cause, outer_iteration=k) from exc
        xs = means(smoothed)
        res = smoother_residuals(xs, model, ys, residual_fn)
        objectives.append(_objective(res, sig, eta))
        if cfg.safeguard and accepted is not None and objective_decreased(objectives[-1], objectives[-2]):
            stop_reason = "objective_decrease"
            break
        alpha = np.array([r.alpha for r in res])
        beta = np.array([r.beta for r in res[1:]])
        weights = SmootherIterationState(
            psi=np.maximum(gaussian_kernel(alpha, sig), cfg.weight_floor),
            phi=np.maximum(gaussian_kernel(beta, eta), cfg.weight_floor),
        )
        prev = None if accepted is None else accepted[2]
        accepted = (smoothed, filtered, xs)
        if prev is not None:
            changes.append(max(relative_change(xs[t], prev[t]) for t in range(1, T + 1)))
            if changes[-1] <= cfg.convergence_tol:
                stop_reason = "tol"
                break
    diag = RobustSmootherDiagnostics(
        outer_iterations=k,
        converged=stop_reason == "tol",
        weights=weights,
        change_history=changes,
        objective_history=objectives,
        filtered_last=accepted[1],
        stop_reason=stop_reason,
    )
    return accepted[0], diag
