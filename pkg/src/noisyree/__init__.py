"""Noisy rational-expectations asset pricing: equilibrium search and estimation."""

from .efficient import TYPE_A, TYPE_B, classify, efficient_coefficients, efficient_slopes
from .model import ModelParams, ParameterError, PriceCoefficients, table_params
from .riccati import essential_utility, lambda_closed_form, optimal_consumption
from .series import ObservationSeries
from .solver import CandidateEquilibrium, SolverConfig, family_peak, solve_candidates, sweep

__version__ = "0.1.0"

__all__ = [
    "TYPE_A", "TYPE_B", "CandidateEquilibrium", "ModelParams", "ObservationSeries", "ParameterError",
    "PriceCoefficients", "SolverConfig", "classify", "efficient_coefficients", "efficient_slopes",
    "essential_utility", "family_peak", "lambda_closed_form", "optimal_consumption", "solve_candidates",
    "sweep", "table_params",
]
