"""Cubature Kalman filtering and smoothing with maximum-correntropy robust variants."""

from .benchmark import EstimatorConfig, MetricsReport, rmse_position, rmse_velocity, run_experiment, trmse
from .cubature import cubature_transform, generate_cubature_points
from .gaussian import (
    StateEstimate,
    StateSpaceModel,
    StepFailure,
    ckf_predict,
    ckf_update,
    cks_smooth_step,
    run_ckf,
    run_cks,
)
from .mcc import KernelConfig, gaussian_kernel, hq_weight, reweight_covariance
from .robust_filter import RobustFilterConfig, rckf_update, run_rckf
from .robust_smoother import RobustSmootherConfig, run_rcks
from .scenarios import simulate, tracking_scenario, trial_rng, vpo_scenario

__all__ = [
    "EstimatorConfig",
    "KernelConfig",
    "MetricsReport",
    "RobustFilterConfig",
    "RobustSmootherConfig",
    "StateEstimate",
    "StateSpaceModel",
    "StepFailure",
    "ckf_predict",
    "ckf_update",
    "cks_smooth_step",
    "cubature_transform",
    "gaussian_kernel",
    "generate_cubature_points",
    "hq_weight",
    "rckf_update",
    "reweight_covariance",
    "rmse_position",
    "rmse_velocity",
    "run_ckf",
    "run_cks",
    "run_experiment",
    "run_rckf",
    "run_rcks",
    "simulate",
    "tracking_scenario",
    "trial_rng",
    "trmse",
    "vpo_scenario",
]
