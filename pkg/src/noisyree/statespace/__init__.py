"""Exact discretization, Kalman filtering, ML estimation and LR testing."""

from .discretize import StateSpaceModel, continuous_system, exact_discretize, stationary_covariance, van_loan
from .estimate import (
    MODE_A,
    MODE_B,
    THETA_NAMES,
    EstimationResult,
    EstimationSpec,
    estimate_ml,
    estimate_nested,
    loglik_at,
    params_from_theta,
)
from .kalman import DIFFUSE_SCALE, FilterBreakdown, FilterResult, filter_states, kalman_loglik
from .lrtest import LRResult, critical_values, lr_test
from .simulate import simulate

__all__ = [
    "DIFFUSE_SCALE", "MODE_A", "MODE_B", "THETA_NAMES",
    "EstimationResult", "EstimationSpec", "FilterBreakdown", "FilterResult", "LRResult", "StateSpaceModel",
    "continuous_system", "critical_values", "estimate_ml", "estimate_nested", "exact_discretize",
    "filter_states", "kalman_loglik", "loglik_at", "lr_test", "params_from_theta", "simulate",
    "stationary_covariance", "van_loan",
]
