"""Cubature Kalman filter (CKF) and cubature RTS smoother (CKS)."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .cubature import _apply, sigma_points, transform_points
from .linalg import FactorizationFailure, jittered_cholesky, spd_sqrt, symmetrize

ResidualFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class InnovationCovSingular(FactorizationFailure):
    """The innovation covariance could not be inverted."""


class PredCovSingular(FactorizationFailure):
    """The one-step predicted covariance could not be inverted in the smoother."""


class StepFailure(RuntimeError):
    """An estimator step failed; carries the time index (and outer iteration, if any)."""

    def __init__(self, t: int, cause: BaseException, outer_iteration: Optional[int] = None):
        self.t = t
        self.cause = cause
        self.outer_iteration = outer_iteration
        where = f"t={t}" if outer_iteration is None else f"outer iteration {outer_iteration}, t={t}"
        super().__init__(f"estimation failed at {where}: {cause}")


def subtract_residual(y: np.ndarray, y_hat: np.ndarray) -> np.ndarray:
    return y - y_hat


@dataclass
class StateEstimate:
    mean: np.ndarray
    cov: np.ndarray
    t: int = 0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if self.cov.shape != (self.mean.size, self.mean.size):
            raise ValueError(f"cov shape {self.cov.shape} does not match mean of size {self.mean.size}")


@dataclass
class StateSpaceModel:
    """Nominal model ``x_t = f(x_{t-1}) + v``, ``y_t = h(x_t) + w``.

    ``Q`` and ``R`` are either single matrices or stacks of shape (T, d, d).
    ``Q[t-1]`` is the covariance of the noise entering step ``t`` and ``R[t-1]``
    is ``R_t``. With ``vectorized=True`` the maps receive point sets as rows.
    ``residual`` is the measurement residual ``r(y, y_hat)``; plain subtraction
    unless a wrapped residual (e.g. for bearings) is needed.
    """

    f: Callable[[np.ndarray], np.ndarray]
    h: Callable[[np.ndarray], np.ndarray]
    Q: np.ndarray
    R: np.ndarray
    prior: StateEstimate
    vectorized: bool = True
    residual: ResidualFn = subtract_residual

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if self.Q.shape[-1] != self.n or self.Q.shape[-2] != self.n:
            raise ValueError(f"Q shape {self.Q.shape} inconsistent with state dim {self.n}")

    @property
    def n(self) -> int:
        return self.prior.mean.size

    @property
    def m(self) -> int:
        return self.R.shape[-1]

    def process_cov(self, t: int) -> np.ndarray:
        """``Q_{t-1}``: covariance of the noise driving the transition into step ``t``."""
        return self.Q if self.Q.ndim == 2 else self.Q[t - 1]

    def meas_cov(self, t: int) -> np.ndarray:
        """``R_t`` for ``t >= 1``."""
        return self.R if self.R.ndim == 2 else self.R[t - 1]

    def replace(self, **changes) -> "StateSpaceModel":
        return dataclasses.replace(self, **changes)

    def apply_f(self, pts: np.ndarray) -> np.ndarray:
        return _apply(self.f, pts, self.vectorized)

    def apply_h(self, pts: np.ndarray) -> np.ndarray:
        return _apply(self.h, pts, self.vectorized)

    def f_single(self, x: np.ndarray) -> np.ndarray:
        return self.apply_f(np.atleast_2d(x))[0]

    def h_single(self, x: np.ndarray) -> np.ndarray:
        return self.apply_h(np.atleast_2d(x))[0]


@dataclass
class UpdateArtifacts:
    predicted_meas: np.ndarray
    innovation_cov: np.ndarray
    cross_cov: np.ndarray
    gain: np.ndarray


@dataclass
class SmootherGain:
    D: np.ndarray
    C: np.ndarray


def kalman_gain(Pxy: np.ndarray, Pyy: np.ndarray) -> np.ndarray:
    """``K = Pxy Pyy^{-1}`` via a Cholesky solve."""
    if Pyy.shape[0] == 1:
        d = Pyy[0, 0]
        if not d > 0.0 or not np.isfinite(d):
            raise InnovationCovSingular(f"innovation variance {d!r} is not positive")
        return Pxy / d
    try:
        L, _ = jittered_cholesky(Pyy)
    except FactorizationFailure as exc:
        raise InnovationCovSingular(str(exc)) from exc
    # Pyy^{-1} Pxy^T = L^{-T} L^{-1} Pxy^T
    z = np.linalg.solve(L, Pxy.T)
    return np.linalg.solve(L.T, z).T


def predict_with_cross(post: StateEstimate, model: StateSpaceModel):
    """Prediction plus the cross-covariance ``C_{t+1}`` the smoother needs."""
    S = spd_sqrt(post.cov)
    pts = sigma_points(post.mean, S)
    tr = transform_points(pts, post.mean, model.apply_f(pts))
    t = post.t + 1
    cov = symmetrize(tr.cov + model.process_cov(t))
    return StateEstimate(tr.mean, cov, t), tr.cross_cov


def ckf_predict(post: StateEstimate, model: StateSpaceModel) -> StateEstimate:
    """Cubature time update ``x_{t|t-1}, P_{t|t-1}`` from the posterior at ``t-1``."""
    return predict_with_cross(post, model)[0]


def measurement_update(
    mean: np.ndarray,
    cov: np.ndarray,
    y: np.ndarray,
    R: np.ndarray,
    model: StateSpaceModel,
    residual_fn: ResidualFn,
):
    """One Kalman correction of ``N(mean, cov)`` with measurement noise ``R``.

    Returns ``(new_mean, new_cov, artifacts)``; ``new_cov`` is symmetrized but
    not checked for definiteness.
    """
    S = spd_sqrt(cov)
    pts = sigma_points(mean, S)
    tr = transform_points(pts, mean, model.apply_h(pts))
    Pyy = symmetrize(tr.cov + R)
    K = kalman_gain(tr.cross_cov, Pyy)
    new_mean = mean + K @ residual_fn(y, tr.mean)
    new_cov = symmetrize(cov - K @ Pyy @ K.T)
    return new_mean, new_cov, UpdateArtifacts(tr.mean, Pyy, tr.cross_cov, K)


def ckf_update(
    pred: StateEstimate,
    y: np.ndarray,
    model: StateSpaceModel,
    residual_fn: Optional[ResidualFn] = None,
) -> tuple[StateEstimate, UpdateArtifacts]:
    """Cubature measurement update at step ``pred.t``."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (model.m,):
        raise ValueError(f"measurement has shape {y.shape}, expected ({model.m},)")
    mean, cov, art = measurement_update(
        pred.mean, pred.cov, y, model.meas_cov(pred.t), model, residual_fn or model.residual
    )
    return StateEstimate(mean, cov, pred.t), art


def cks_smooth_step(
    filt_t: StateEstimate,
    pred_t1: StateEstimate,
    smoothed_t1: StateEstimate,
    model: StateSpaceModel,
    cross_cov: Optional[np.ndarray] = None,
) -> tuple[StateEstimate, SmootherGain]:
    """One backward RTS step.

    ``cross_cov`` may carry ``C_{t+1}`` from the forward pass; otherwise it is
    recomputed from sigma points of the filtered density.
    """
    if cross_cov is None:
        _, cross_cov = predict_with_cross(filt_t, model)
    C = cross_cov
    try:
        L = np.linalg.cholesky(pred_t1.cov)
    except np.linalg.LinAlgError:
        try:
            L, _ = jittered_cholesky(pred_t1.cov)
        except FactorizationFailure as exc:
            raise PredCovSingular(str(exc)) from exc
    D = np.linalg.solve(L.T, np.linalg.solve(L, C.T)).T
    mean = filt_t.mean + D @ (smoothed_t1.mean - pred_t1.mean)
    cov = symmetrize(filt_t.cov + D @ (smoothed_t1.cov - pred_t1.cov) @ D.T)
    return StateEstimate(mean, cov, filt_t.t), SmootherGain(D=D, C=C)


def _as_measurements(ys, m: int) -> np.ndarray:
    ys = np.asarray(ys, dtype=float)
    if ys.ndim == 1:
        ys = ys.reshape(-1, m) if m > 1 else ys[:, None]
    if ys.shape[0] < 1:
        raise ValueError("need at least one measurement")
    if ys.shape[1] != m:
        raise ValueError(f"measurements have dimension {ys.shape[1]}, model expects {m}")
    return ys


def _check_finite(est: StateEstimate) -> None:
    if not (np.all(np.isfinite(est.mean)) and np.all(np.isfinite(est.cov))):
        raise FloatingPointError("estimate became non-finite")


def forward_pass(model: StateSpaceModel, ys, residual_fn: Optional[ResidualFn] = None):
    """CKF forward recursion returning filtered, predicted and cross covariances.

    ``filtered[0]`` is the prior; ``predicted[t-1]`` is ``x_{t|t-1}``.
    """
    ys = _as_measurements(ys, model.m)
    residual_fn = residual_fn or model.residual
    post = StateEstimate(model.prior.mean, model.prior.cov, 0)
    filtered, predicted, crosses = [post], [], []
    for t in range(1, ys.shape[0] + 1):
        try:
            pred, C = predict_with_cross(post, model)
            mean, cov, _ = measurement_update(
                pred.mean, pred.cov, ys[t - 1], model.meas_cov(t), model, residual_fn
            )
            post = StateEstimate(mean, cov, t)
            _check_finite(post)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            raise StepFailure(t, exc) from exc
        filtered.append(post)
        predicted.append(pred)
        crosses.append(C)
    return filtered, predicted, crosses


def run_ckf(
    model: StateSpaceModel, ys, residual_fn: Optional[ResidualFn] = None
) -> list[tuple[StateEstimate, StateEstimate]]:
    """Run the CKF over ``ys``; returns ``(filtered, predicted)`` for t = 1..T."""
    filtered, predicted, _ = forward_pass(model, ys, residual_fn)
    return list(zip(filtered[1:], predicted))


def backward_pass(model, filtered, predicted, crosses) -> list[StateEstimate]:
    T = len(predicted)
    smoothed = [None] * (T + 1)
    smoothed[T] = filtered[T]
    for t in range(T - 1, -1, -1):
        try:
            smoothed[t], _ = cks_smooth_step(
                filtered[t], predicted[t], smoothed[t + 1], model, cross_cov=crosses[t]
            )
            _check_finite(smoothed[t])
        except (np.linalg.LinAlgError, FloatingPointError) as exc:
            raise StepFailure(t, exc) from exc
    return smoothed


def run_cks(
    model: StateSpaceModel, ys, residual_fn: Optional[ResidualFn] = None
) -> list[StateEstimate]:
    """CKF forward pass followed by the cubature RTS backward pass.

    Returns smoothed estimates for t = 0..T (index 0 is the smoothed initial
    state, which the robust smoother needs for its prior residual).
    """
    filtered, predicted, crosses = forward_pass(model, ys, residual_fn)
    return backward_pass(model, filtered, predicted, crosses)


def means(estimates: Sequence[StateEstimate]) -> np.ndarray:
    return np.array([e.mean for e in estimates])
