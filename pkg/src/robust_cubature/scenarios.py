"""Benchmark systems, contaminated-noise sampling and trajectory simulation.

Two presets are provided:

* ``vpo``: Van der Pol oscillator, RK4-discretized, observed through
  ``y = (x1 - 1)^2 + 1``.
* ``tracking``: constant-velocity target observed by a range/bearing radar
  at the origin.

Every trial draws from its own generator ``trial_rng(master_seed, i)`` so
results do not depend on the order in which trials run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .gaussian import StateEstimate, StateSpaceModel


@dataclass(frozen=True)
class MixedGaussianNoise:
    """``(1 - ratio) N(0, C) + ratio N(0, scale * C)``."""

    nominal_cov: np.ndarray
    contamination_ratio: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.contamination_ratio <= 1.0:
            raise ValueError("contamination_ratio must be in [0, 1]")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "nominal_cov", np.atleast_2d(np.asarray(self.nominal_cov, dtype=float)))

    @property
    def dim(self) -> int:
        return self.nominal_cov.shape[0]

    @property
    def total_cov(self) -> np.ndarray:
        r = self.contamination_ratio
        return ((1 - r) + r * self.scale) * self.nominal_cov


def _noise_factor(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        # PSD (possibly zero) covariance
        w, V = np.linalg.eigh(cov)
        return V * np.sqrt(np.clip(w, 0.0, None))


def sample_mixed_gaussian(noise: MixedGaussianNoise, rng: np.random.Generator) -> tuple[np.ndarray, bool]:
    """One draw and whether it came from the contaminating component.

    Always consumes one uniform and ``dim`` normals, whatever the outcome.
    """
    contaminated = bool(rng.random() < noise.contamination_ratio)
    z = rng.standard_normal(noise.dim)
    draw = _noise_factor(noise.nominal_cov) @ z
    if contaminated:
        draw = np.sqrt(noise.scale) * draw
    return draw, contaminated


# ---------------------------------------------------------------- Van der Pol

def vpo_field(x: np.ndarray, mu: float) -> np.ndarray:
    x1, x2 = x[..., 0], x[..., 1]
    return np.stack([x2, mu * (1.0 - x1 * x1) * x2 - x1], axis=-1)


def vpo_step(x: np.ndarray, mu: float = 1.0, delta: float = 0.1) -> np.ndarray:
    """One classical RK4 step of the Van der Pol field, step size ``delta``.

    Accepts a single 2-vector or a stack of them as rows.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    x = np.asarray(x, dtype=float)
    k1 = vpo_field(x, mu)
    k2 = vpo_field(x + 0.5 * delta * k1, mu)
    k3 = vpo_field(x + 0.5 * delta * k2, mu)
    k4 = vpo_field(x + delta * k3, mu)
    return x + (delta / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def vpo_measurement(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return ((x[..., 0] - 1.0) ** 2 + 1.0)[..., None]


# ------------------------------------------------------------------ tracking

def wrap_angle(a):
    """Map angles into (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    w = np.mod(a + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


def range_bearing(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    a, b = x[..., 0], x[..., 1]
    return np.stack([np.hypot(a, b), np.arctan2(b, a)], axis=-1)


def range_bearing_residual(y: np.ndarray, y_hat: np.ndarray) -> np.ndarray:
    r = np.asarray(y, dtype=float) - y_hat
    r[..., 1] = wrap_angle(r[..., 1])
    return r


def cv_transition(delta: float) -> np.ndarray:
    I2 = np.eye(2)
    return np.block([[I2, delta * I2], [np.zeros((2, 2)), I2]])


def cv_process_cov(delta: float) -> np.ndarray:
    I2 = np.eye(2)
    return np.block([[delta**3 / 3 * I2, delta**2 / 2 * I2], [delta**2 / 2 * I2, delta * I2]])


class _Linear:
    """Picklable affine map ``x -> A x + b`` acting on rows."""

    def __init__(self, A, b=None):
        self.A = np.asarray(A, dtype=float)
        self.b = np.zeros(self.A.shape[0]) if b is None else np.asarray(b, dtype=float)

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.A.T + self.b


class _VPOTransition:
    def __init__(self, mu: float, delta: float):
        self.mu, self.delta = mu, delta

    def __call__(self, x):
        return vpo_step(x, self.mu, self.delta)


# ------------------------------------------------------------------- scenario

@dataclass
class ScenarioSpec:
    """A benchmark system plus its noise generators.

    ``model.prior.cov`` equals ``prior_sampling_cov``; its mean is replaced per
    trial by a draw from ``N(initial_truth, prior_sampling_cov)``.
    """

    name: str
    model: StateSpaceModel
    noise_proc: MixedGaussianNoise
    noise_meas: MixedGaussianNoise
    T: int
    initial_truth: np.ndarray
    prior_sampling_cov: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")

    def model_for(self, traj: "SimulatedTrajectory") -> StateSpaceModel:
        """The estimator model for one trial (prior mean set from the trial)."""
        return self.model.replace(prior=StateEstimate(traj.prior_mean, self.prior_sampling_cov, 0))


@dataclass
class SimulatedTrajectory:
    states: np.ndarray  # (T+1, n)
    measurements: np.ndarray  # (T, m)
    process_flags: np.ndarray  # (T,) bool
    measurement_flags: np.ndarray  # (T,) bool
    prior_mean: np.ndarray


def vpo_scenario(
    p1: float = 0.0,
    p2: float = 0.0,
    phi1: float = 10.0,
    phi2: float = 50.0,
    T: int = 120,
    mu: float = 1.0,
    delta: float = 0.1,
) -> ScenarioSpec:
    """Van der Pol benchmark; defaults are the published settings."""
    for p in (p1, p2):
        if not 0.0 <= p <= 1.0:
            raise ValueError("contamination ratios must be in [0, 1]")
    x0 = np.array([0.0, -0.5])
    P0 = 0.01 * np.eye(2)
    Q = 0.01 * np.eye(2)
    R = np.array([[1.0]])
    model = StateSpaceModel(
        f=_VPOTransition(mu, delta), h=vpo_measurement, Q=Q, R=R, prior=StateEstimate(x0, P0, 0)
    )
    return ScenarioSpec(
        name="vpo",
        model=model,
        noise_proc=MixedGaussianNoise(Q, p1, phi1),
        noise_meas=MixedGaussianNoise(R, p2, phi2),
        T=T,
        initial_truth=x0,
        prior_sampling_cov=P0,
        params=dict(p1=p1, p2=p2, phi1=phi1, phi2=phi2, T=T, mu=mu, delta=delta),
    )


def tracking_scenario(
    p1: float = 0.2,
    p2: float = 0.2,
    phi1: float = 10.0,
    phi2: float = 50.0,
    T: int = 200,
    delta: float = 0.5,
) -> ScenarioSpec:
    """Agile target tracked by a range/bearing radar; bearing variance 16 mrad^2."""
    x0 = np.array([-10000.0, 10000.0, 30.0, -40.0])
    P0 = 100.0 * np.eye(4)
    Q = cv_process_cov(delta)
    R = np.diag([100.0, 16e-6])
    model = StateSpaceModel(
        f=_Linear(cv_transition(delta)),
        h=range_bearing,
        Q=Q,
        R=R,
        prior=StateEstimate(x0, P0, 0),
        residual=range_bearing_residual,
    )
    return ScenarioSpec(
        name="tracking",
        model=model,
        noise_proc=MixedGaussianNoise(Q, p1, phi1),
        noise_meas=MixedGaussianNoise(R, p2, phi2),
        T=T,
        initial_truth=x0,
        prior_sampling_cov=P0,
        params=dict(p1=p1, p2=p2, phi1=phi1, phi2=phi2, T=T, delta=delta),
    )


PRESETS = {"vpo": vpo_scenario, "tracking": tracking_scenario}


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Independent substream for one Monte-Carlo trial."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(trial_index)]))


def simulate(spec: ScenarioSpec, rng: np.random.Generator) -> SimulatedTrajectory:
    """Simulate truth and measurements; also draws the estimator's prior mean.

    Draw order: prior mean, then for each step the process draw followed by
    the measurement draw.
    """
    model = spec.model
    n, m, T = model.n, model.m, spec.T
    prior_mean = spec.initial_truth + _noise_factor(spec.prior_sampling_cov) @ rng.standard_normal(n)
    states = np.empty((T + 1, n))
    ys = np.empty((T, m))
    pflags = np.zeros(T, dtype=bool)
    mflags = np.zeros(T, dtype=bool)
    states[0] = spec.initial_truth
    for t in range(1, T + 1):
        w, pflags[t - 1] = sample_mixed_gaussian(spec.noise_proc, rng)
        states[t] = model.f_single(states[t - 1]) + w
        v, mflags[t - 1] = sample_mixed_gaussian(spec.noise_meas, rng)
        ys[t - 1] = model.h_single(states[t]) + v
    return SimulatedTrajectory(states, ys, pflags, mflags, prior_mean)


# ------------------------------------------------------- linear-Gaussian oracle

@dataclass
class AffineModel:
    """``x_t = A x_{t-1} + a + v``, ``y_t = H x_t + c + w`` with Gaussian noise."""

    A: np.ndarray
    a: np.ndarray
    H: np.ndarray
    c: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    x0: np.ndarray
    P0: np.ndarray

    def as_state_space(self) -> StateSpaceModel:
        return StateSpaceModel(
            f=_Linear(self.A, self.a),
            h=_Linear(self.H, self.c),
            Q=self.Q,
            R=self.R,
            prior=StateEstimate(self.x0, self.P0, 0),
        )

    def simulate(self, T: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        n, m = self.A.shape[0], self.H.shape[0]
        xs = np.empty((T + 1, n))
        ys = np.empty((T, m))
        xs[0] = self.x0 + np.linalg.cholesky(self.P0) @ rng.standard_normal(n)
        LQ, LR = np.linalg.cholesky(self.Q), np.linalg.cholesky(self.R)
        for t in range(1, T + 1):
            xs[t] = self.A @ xs[t - 1] + self.a + LQ @ rng.standard_normal(n)
            ys[t - 1] = self.H @ xs[t] + self.c + LR @ rng.standard_normal(m)
        return xs, ys


def random_spd(rng: np.random.Generator, n: int, eps: float = 0.1) -> np.ndarray:
    A = rng.standard_normal((n, n))
    return A @ A.T + eps * np.eye(n)


def random_affine_model(rng: np.random.Generator, n: int = 3, m: int = 2) -> AffineModel:
    A = rng.standard_normal((n, n))
    A *= 0.95 / max(1.0, np.max(np.abs(np.linalg.eigvals(A))))
    return AffineModel(
        A=A,
        a=rng.standard_normal(n),
        H=rng.standard_normal((m, n)),
        c=rng.standard_normal(m),
        Q=random_spd(rng, n),
        R=random_spd(rng, m),
        x0=rng.standard_normal(n),
        P0=random_spd(rng, n),
    )


def kalman_filter_affine(model: AffineModel, ys: np.ndarray):
    """Closed-form Kalman filter; returns filtered and predicted (means, covs), t = 1..T."""
    x, P = model.x0.copy(), model.P0.copy()
    fm, fP, pm, pP = [], [], [], []
    for y in ys:
        xp = model.A @ x + model.a
        Pp = model.A @ P @ model.A.T + model.Q
        S = model.H @ Pp @ model.H.T + model.R
        K = Pp @ model.H.T @ np.linalg.inv(S)
        x = xp + K @ (y - model.H @ xp - model.c)
        P = (np.eye(len(x)) - K @ model.H) @ Pp @ (np.eye(len(x)) - K @ model.H).T + K @ model.R @ K.T
        fm.append(x), fP.append(P), pm.append(xp), pP.append(Pp)
    return np.array(fm), np.array(fP), np.array(pm), np.array(pP)


def rts_smoother_affine(model: AffineModel, ys: np.ndarray):
    """Closed-form RTS smoother; returns means and covs for t = 0..T."""
    fm, fP, pm, pP = kalman_filter_affine(model, ys)
    fm = np.vstack([model.x0, fm])
    fP = np.concatenate([model.P0[None], fP])
    T = len(ys)
    sm, sP = fm.copy(), fP.copy()
    for t in range(T - 1, -1, -1):
        G = fP[t] @ model.A.T @ np.linalg.inv(pP[t])
        sm[t] = fm[t] + G @ (sm[t + 1] - pm[t])
        sP[t] = fP[t] + G @ (sP[t + 1] - pP[t]) @ G.T
    return sm, sP
