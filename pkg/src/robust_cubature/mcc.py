"""Correntropy kernel, half-quadratic weights and covariance reweighting.

The half-quadratic (HQ) trick writes the Gaussian kernel as

    kappa_s(x) = sup_{-1 <= p < 0} ( p x^2 / (2 s^2) - psi(p) ),

attained at ``p = -kappa_s(x)``. Fixing ``p`` turns the correntropy
objective into a weighted quadratic, i.e. a Kalman problem with the
covariances inflated by ``1/(-p)`` along whitened directions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .gaussian import ResidualFn, StateEstimate, StateSpaceModel
from .linalg import spd_sqrt, symmetrize, whiten

DEFAULT_WEIGHT_FLOOR = 1e-8


@dataclass(frozen=True)
class KernelConfig:
    """Per-component bandwidths: ``sigma`` for state residuals, ``eta`` for measurements."""

    sigma: tuple
    eta: tuple

    def __post_init__(self):
        sigma = tuple(float(s) for s in np.atleast_1d(self.sigma))
        eta = tuple(float(e) for e in np.atleast_1d(self.eta))
        for v in sigma + eta:
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"bandwidths must be positive and finite, got {v}")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "eta", eta)

    @classmethod
    def uniform(cls, sigma: float, eta: float, n: int, m: int) -> "KernelConfig":
        """Same bandwidth on every state component and on every measurement component."""
        return cls(sigma=(sigma,) * n, eta=(eta,) * m)

    def sigma_array(self, n: int) -> np.ndarray:
        return _broadcast(self.sigma, n, "sigma")

    def eta_array(self, m: int) -> np.ndarray:
        return _broadcast(self.eta, m, "eta")


def _broadcast(vals: Sequence[float], d: int, name: str) -> np.ndarray:
    arr = np.asarray(vals, dtype=float)
    if arr.size == 1:
        return np.full(d, arr[0])
    if arr.size != d:
        raise ValueError(f"{name} has {arr.size} entries, expected {d}")
    return arr


@dataclass
class HQWeights:
    """Auxiliary variables ``p`` (state) and ``q`` (measurement), entries in [-1, 0)."""

    p: np.ndarray
    q: np.ndarray

    @property
    def psi(self) -> np.ndarray:
        """Diagonal of ``Psi = diag(-p)``."""
        return -self.p

    @property
    def phi(self) -> np.ndarray:
        """Diagonal of ``Phi = diag(-q)``."""
        return -self.q


@dataclass
class NormalizedResiduals:
    alpha: np.ndarray
    beta: np.ndarray


def gaussian_kernel(e, sigma):
    """``exp(-e^2 / (2 sigma^2))``; works elementwise on arrays."""
    e = np.asarray(e, dtype=float)
    return np.exp(-(e * e) / (2.0 * np.square(sigma)))


def hq_weight(residual, bandwidth):
    """Maximizing auxiliary variable ``p = -kappa(residual)``."""
    return -gaussian_kernel(residual, bandwidth)


def hq_majorization_gap(x: float, x0: float, sigma: float) -> float:
    """Gap between the kernel and its HQ surrogate built at ``x0``.

    The surrogate ``kappa(x0) + p*(x^2 - x0^2)/(2 sigma^2)`` with
    ``p* = -kappa(x0)`` touches the kernel at ``x0`` and lies below it
    everywhere, so the gap is non-negative.
    """
    k0 = float(gaussian_kernel(x0, sigma))
    surrogate = k0 - k0 * (x * x - x0 * x0) / (2.0 * sigma * sigma)
    return float(gaussian_kernel(x, sigma)) - surrogate


def reweight_covariance(
    cov: np.ndarray,
    psi_diag,
    floor: float = DEFAULT_WEIGHT_FLOOR,
    chol: Optional[np.ndarray] = None,
) -> np.ndarray:
    """``S diag(max(psi, floor))^{-1} S^T`` with ``S`` the Cholesky factor of ``cov``.

    All-ones weights return ``cov`` itself, so the first HQ pass is exactly
    the unweighted problem.
    """
    cov = np.asarray(cov, dtype=float)
    psi = np.maximum(np.asarray(psi_diag, dtype=float), floor)
    if np.all(psi == 1.0):
        return cov
    S = spd_sqrt(cov) if chol is None else chol
    Ss = S / np.sqrt(psi)  # scales column i by psi_i^{-1/2}
    return symmetrize(Ss @ Ss.T)


def weight_diagonal(residuals, bandwidths, floor: float = DEFAULT_WEIGHT_FLOOR) -> np.ndarray:
    """Positive diagonal ``max(kappa(residual), floor)`` fed to reweighting."""
    return np.maximum(gaussian_kernel(residuals, bandwidths), floor)


def correntropy_objective(res: NormalizedResiduals, sigma: np.ndarray, eta: np.ndarray) -> float:
    """``sum sigma^2 kappa_sigma(alpha) + sum eta^2 kappa_eta(beta)``.

    This is the robust cost with the consistency coefficients ``a = sigma^2``,
    ``b = eta^2``; it equals the HQ augmented cost once the auxiliary variables
    are refreshed, so HQ iterations never decrease it.
    """
    return float(
        np.sum(sigma**2 * gaussian_kernel(res.alpha, sigma))
        + np.sum(eta**2 * gaussian_kernel(res.beta, eta))
    )


def normalized_residuals_filter(
    x: np.ndarray,
    pred: StateEstimate,
    y: np.ndarray,
    model: StateSpaceModel,
    residual_fn: Optional[ResidualFn] = None,
    chol_P: Optional[np.ndarray] = None,
    chol_R: Optional[np.ndarray] = None,
) -> NormalizedResiduals:
    """Whitened prediction and measurement residuals at candidate state ``x``.

    Whitening uses the nominal ``P_{t|t-1}`` and ``R_t``, never reweighted ones.
    """
    residual_fn = residual_fn or model.residual
    x = np.asarray(x, dtype=float)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    SP = spd_sqrt(pred.cov) if chol_P is None else chol_P
    SR = spd_sqrt(model.meas_cov(pred.t)) if chol_R is None else chol_R
    alpha = whiten(SP, x - pred.mean)
    beta = whiten(SR, residual_fn(y, model.h_single(x)))
    return NormalizedResiduals(alpha=alpha, beta=beta)
