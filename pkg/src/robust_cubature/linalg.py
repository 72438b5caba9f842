"""Small dense SPD helpers shared by every estimator.

All square roots are lower-triangular Cholesky factors, so ``S @ S.T == P``.
"""

from __future__ import annotations

import numpy as np


class FactorizationFailure(np.linalg.LinAlgError):
    """Raised when a matrix cannot be factorized as SPD, even with jitter."""


JITTER_BASE = 1e-12
JITTER_GROWTH = 10.0
JITTER_ATTEMPTS = 6


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return the symmetric part ``(m + m.T) / 2``."""
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def _scaled_jitter(m: np.ndarray, jitter: float) -> float:
    n = m.shape[0]
    scale = abs(float(np.trace(m))) / n
    return jitter * (scale if scale > 0.0 else 1.0)


def jittered_cholesky(m: np.ndarray, jitter: float = JITTER_BASE) -> tuple[np.ndarray, float]:
    """Cholesky factor of ``m`` with escalating diagonal loading.

    Plain factorization is tried first. On failure ``m + j*I`` is tried with
    ``j = jitter * trace(m)/n``, growing tenfold per attempt.

    Args:
        m: symmetric matrix.
        jitter: base relative jitter (>= 0).

    Returns:
        ``(S, applied_jitter)`` where ``applied_jitter`` is the absolute
        diagonal load that made the factorization succeed (0 if none).

    Raises:
        FactorizationFailure: if every attempt fails.
    """
    m = np.asarray(m, dtype=float)
    if jitter < 0:
        raise ValueError("jitter must be non-negative")
    try:
        return np.linalg.cholesky(m), 0.0
    except np.linalg.LinAlgError:
        pass
    if not np.all(np.isfinite(m)):
        raise FactorizationFailure("matrix has non-finite entries")
    load = _scaled_jitter(m, jitter)
    eye = np.eye(m.shape[0])
    for _ in range(JITTER_ATTEMPTS):
        if load > 0.0:
            try:
                return np.linalg.cholesky(m + load * eye), load
            except np.linalg.LinAlgError:
                pass
        load *= JITTER_GROWTH
    raise FactorizationFailure(
        f"matrix is not positive definite (last jitter tried {load / JITTER_GROWTH:.3g})"
    )


def spd_sqrt(m: np.ndarray) -> np.ndarray:
    """Lower-triangular ``S`` with ``S @ S.T == m``.

    Falls back to :func:`jittered_cholesky` for matrices that are SPD only up
    to round-off.
    """
    m = np.asarray(m, dtype=float)
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return jittered_cholesky(m)[0]


def is_spd(m: np.ndarray) -> bool:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    scale = max(np.abs(m).max(), 1e-300)
    if np.abs(m - m.T).max() > 1e-12 * scale:
        return False
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return False
    return True


def whiten(chol: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Solve ``chol @ z = v`` for lower-triangular ``chol``."""
    n = chol.shape[0]
    if n == 1:
        return np.asarray(v, dtype=float) / chol[0, 0]
    return np.linalg.solve(chol, v)
