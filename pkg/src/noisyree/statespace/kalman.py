"""Diffuse-prior square-root Kalman filter and Gaussian log-likelihood."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..kernels import kalman_filter
from ..series import ObservationSeries
from .discretize import StateSpaceModel

DIFFUSE_SCALE = 1e6
PRIORS = ("diffuse", "mixed")


class FilterBreakdown(ArithmeticError):
    """An innovation covariance lost positive definiteness."""


@dataclass(frozen=True)
class FilterResult:
    means: np.ndarray
    covs: np.ndarray
    loglik: float


def _as_obs(series) -> np.ndarray:
    if isinstance(series, ObservationSeries):
        return series.observations()
    y = np.asarray(series, dtype=float)
    return y[:, None] if y.ndim == 1 else y


def initial_covariance(model: StateSpaceModel, prior: str = "diffuse", scale: float = DIFFUSE_SCALE) -> np.ndarray:
    """Prior covariance of the state at time zero.

    ``"diffuse"`` puts ``scale`` on every diagonal entry. ``"mixed"`` keeps
    ``scale`` for unit-root states only and gives the mean-reverting
    states their stationary covariance; it falls back to ``"diffuse"`` if
    the mean-reverting states do not form a closed subsystem.
    """
    n = model.F.shape[0]
    if prior == "diffuse":
        return scale * np.eye(n)
    if prior != "mixed":
        raise ValueError(f"prior must be one of {PRIORS}")
    F = model.F
    diag = np.abs(np.diag(F))
    unit = np.flatnonzero(diag >= 1.0 - 1e-12)
    stat = np.flatnonzero(diag < 1.0 - 1e-12)
    if len(stat) == 0 or np.any(F[stat[:, None], unit] != 0.0):
        return scale * np.eye(n)
    # the stationary block is tiny, so vec(V) = (I - F kron F)^-1 vec(Omega) directly
    Fs = F[stat[:, None], stat]
    k = len(stat)
    kron = (Fs[:, None, :, None] * Fs[None, :, None, :]).reshape(k * k, k * k)
    vec = np.linalg.solve(np.eye(k * k) - kron, model.Omega[stat[:, None], stat].ravel())
    V = vec.reshape(k, k)
    P0 = np.zeros((n, n))
    P0[unit, unit] = scale
    P0[stat[:, None], stat] = 0.5 * (V + V.T)
    return P0


def psd_factor(M: np.ndarray) -> np.ndarray:
    """``S`` with ``S S' = M`` for symmetric positive semi-definite ``M``.

    Cholesky when it succeeds; otherwise an eigen-factor with negative
    rounding-level eigenvalues clipped to zero.
    """
    M = 0.5 * (M + M.T)
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        w, U = np.linalg.eigh(M)
        return np.ascontiguousarray(U * np.sqrt(np.clip(w, 0.0, None)))


def _run(model: StateSpaceModel, series, keep: bool, include_constant: bool, prior_scale: float, prior: str = "diffuse"):
    y = np.ascontiguousarray(_as_obs(series))
    if y.shape[0] == 0:
        raise ValueError("empty series")
    if y.shape[1] != model.H.shape[0]:
        raise ValueError(f"observation width {y.shape[1]} does not match H rows {model.H.shape[0]}")
    ll, means, covs, ok = kalman_filter(
        np.ascontiguousarray(model.F), np.ascontiguousarray(model.Omega), psd_factor(model.Omega),
        np.ascontiguousarray(model.H), np.asarray(model.measurement_intercept, dtype=float),
        y, psd_factor(initial_covariance(model, prior, prior_scale)), keep,
    )
    if not ok:
        raise FilterBreakdown("innovation covariance is not positive definite")
    if include_constant:
        ll -= 0.5 * y.shape[0] * y.shape[1] * math.log(2.0 * math.pi)
    return float(ll), means, covs


def kalman_loglik(
    model: StateSpaceModel,
    series,
    include_constant: bool = True,
    prior_scale: float = DIFFUSE_SCALE,
    prior: str = "diffuse",
) -> float:
    """Exact Gaussian log-likelihood from the prediction-error decomposition.

    The prior is zero mean with ``prior_scale * I`` covariance by default;
    see :func:`initial_covariance` for ``prior="mixed"``. The
    ``-(n m / 2) log(2 pi)`` constant is included unless switched off.

    Raises
    ------
    FilterBreakdown
        If an innovation covariance is not positive definite.
    """
    return _run(model, series, False, include_constant, prior_scale, prior)[0]


def filter_states(
    model: StateSpaceModel,
    series,
    include_constant: bool = True,
    prior_scale: float = DIFFUSE_SCALE,
    prior: str = "diffuse",
) -> FilterResult:
    """Filtered means and covariances of ``(D0, I, D1, Theta)`` per period."""
    ll, means, covs = _run(model, series, True, include_constant, prior_scale, prior)
    return FilterResult(means=np.asarray(means), covs=np.asarray(covs), loglik=ll)
