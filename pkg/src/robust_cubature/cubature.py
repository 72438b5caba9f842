"""Third-degree spherical-radial cubature rule."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .linalg import spd_sqrt, symmetrize


class InvalidDimension(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class CubatureSet:
    """Unit cubature points (rows) and their weights."""

    points: np.ndarray  # (2n, n)
    weights: np.ndarray  # (2n,)

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass
class TransformResult:
    """Moments of ``g(x)`` for ``x ~ N(mean, cov)``; ``cov`` excludes additive noise."""

    mean: np.ndarray
    cov: np.ndarray
    cross_cov: np.ndarray  # (n_in, n_out)


@lru_cache(maxsize=64)
def _unit_points(n: int) -> np.ndarray:
    pts = np.sqrt(n) * np.vstack([np.eye(n), -np.eye(n)])
    pts.setflags(write=False)
    return pts


def generate_cubature_points(n: int) -> CubatureSet:
    """Points ``±sqrt(n) e_i`` in column order ``[I, -I]``, each weighted ``1/(2n)``."""
    if n < 1:
        raise InvalidDimension(f"dimension must be >= 1, got {n}")
    return CubatureSet(points=_unit_points(n), weights=np.full(2 * n, 1.0 / (2 * n)))


def sigma_points(mean: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """Rows ``S @ xi_i + mean`` for the basic cubature set."""
    return _unit_points(mean.shape[0]) @ chol.T + mean


def _apply(g: Callable, pts: np.ndarray, vectorized: bool) -> np.ndarray:
    if vectorized:
        out = np.asarray(g(pts), dtype=float)
        if out.ndim == 1:
            out = out[:, None]
        if out.shape[0] != pts.shape[0]:
            raise DimensionMismatch(
                f"map returned {out.shape[0]} rows for {pts.shape[0]} points"
            )
        return out
    images = [np.atleast_1d(np.asarray(g(p), dtype=float)) for p in pts]
    dims = {img.shape for img in images}
    if len(dims) != 1:
        raise DimensionMismatch(f"map output shapes differ across points: {sorted(dims)}")
    return np.vstack(images)


def transform_points(pts: np.ndarray, mean: np.ndarray, images: np.ndarray) -> TransformResult:
    """Weighted moments from already evaluated sigma points."""
    w = 1.0 / pts.shape[0]
    y_mean = images.mean(axis=0)
    dy = images - y_mean
    dx = pts - mean
    cov = symmetrize(w * dy.T @ dy)
    cross = w * dx.T @ dy
    return TransformResult(mean=y_mean, cov=cov, cross_cov=cross)


def cubature_transform(
    mean: np.ndarray,
    cov: np.ndarray,
    g: Callable[[np.ndarray], np.ndarray],
    vectorized: bool = False,
    chol: np.ndarray | None = None,
) -> TransformResult:
    """Propagate ``N(mean, cov)`` through ``g`` with the cubature rule.

    Args:
        mean: input mean, shape (n,).
        cov: input covariance, shape (n, n).
        g: the nonlinear map. With ``vectorized=True`` it receives all points
            as rows of a (2n, n) array and must return a (2n, m) array;
            otherwise it is called once per point.
        vectorized: see ``g``.
        chol: optional precomputed lower Cholesky factor of ``cov``.

    Returns:
        TransformResult with the image mean, the image spread (no noise term)
        and the cross-covariance ``sum w (x_i - mean)(g_i - g_mean)^T``.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (mean.shape[0], mean.shape[0]):
        raise DimensionMismatch(f"cov shape {cov.shape} does not match mean {mean.shape}")
    S = spd_sqrt(cov) if chol is None else chol
    pts = sigma_points(mean, S)
    return transform_points(pts, mean, _apply(g, pts, vectorized))
