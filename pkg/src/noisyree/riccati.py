"""Riccati blocks, residuals, demand, lambda and consumption.

The investor's value function is ``-exp(-beta t - r phi W - Z'LZ/2 - lambda)``.
Wealth compounds at the riskless rate ``r``, so ``r`` (not ``r - xi``)
appears wherever wealth enters: the ``-r/2`` shift inside ``X``, the demand
denominator and the consumption rule. The return drift ``S`` discounts
the de-trended price at ``r - xi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    N_STATE,
    ModelParams,
    ParameterError,
    PriceCoefficients,
    build_system_matrices,
    return_loadings,
)

# demand must equal the supply row (1, 0, 0, 0, 1)
SUPPLY_ROW = np.array([1.0, 0.0, 0.0, 0.0, 1.0])


@dataclass(frozen=True)
class RiccatiBlocks:
    U: np.ndarray
    X: np.ndarray
    Y: np.ndarray


def _check_symmetric(L: np.ndarray) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    if L.shape != (N_STATE, N_STATE):
        raise ValueError(f"L must be 5x5, got {L.shape}")
    if not np.allclose(L, L.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(L).max())):
        raise ValueError("L must be symmetric")
    return L


def build_riccati_blocks(params: ModelParams, coeffs: PriceCoefficients) -> RiccatiBlocks:
    """``U``, ``X`` and ``Y`` of the Riccati equation for a price rule."""
    sm = build_system_matrices(params)
    rl = return_loadings(params, coeffs)
    if not math.isfinite(rl.T):
        raise ValueError("non-finite return variance")
    Bh, t, S = sm.Bhalf, rl.Thalf, rl.S
    U = Bh @ (rl.T * np.eye(Bh.shape[1]) - np.outer(t, t)) @ Bh.T
    X = rl.T * (sm.A - 0.5 * params.r * np.eye(N_STATE)) - np.outer(Bh @ t, S)
    Y = np.outer(S, S)
    return RiccatiBlocks(U=U, X=X, Y=Y)


def riccati_residual(L, blocks: RiccatiBlocks) -> np.ndarray:
    """``L U L - L X - X' L - Y``."""
    L = _check_symmetric(L)
    return L @ blocks.U @ L - L @ blocks.X - blocks.X.T @ L - blocks.Y


def demand_row(params: ModelParams, coeffs: PriceCoefficients, L) -> np.ndarray:
    """Optimal holding per state, ``psi = -(Thalf Bhalf' L - S) / (r phi T)``.

    Raises
    ------
    ValueError
        If the return variance ``T`` is not positive.
    """
    L = _check_symmetric(L)
    sm = build_system_matrices(params)
    rl = return_loadings(params, coeffs)
    if not rl.T > 0:
        raise ValueError("demand is undefined when T <= 0")
    return -(rl.Thalf @ sm.Bhalf.T @ L - rl.S) / (params.r * params.phi * rl.T)


def clearing_residual(params: ModelParams, coeffs: PriceCoefficients, L) -> np.ndarray:
    """Demand minus supply, all five components ``(1, D0, D1, I, Theta)``."""
    return demand_row(params, coeffs, L) - SUPPLY_ROW


def lambda_closed_form(params: ModelParams, L) -> float:
    """Root of ``r (1 + lambda - log r) - beta - tr(Bhalf' L Bhalf) / 2``."""
    if params.r <= 0:
        raise ParameterError("lambda needs r > 0")
    L = _check_symmetric(L)
    Bh = build_system_matrices(params).Bhalf
    tr = float(np.trace(Bh.T @ L @ Bh))
    return params.beta / params.r - 1.0 + math.log(params.r) + tr / (2.0 * params.r)


def essential_utility(L, lam: float) -> float:
    """State-independent part of the value function, ``lambda + L[0, 0] / 2``."""
    return float(lam + 0.5 * np.asarray(L)[0, 0])


def optimal_consumption(params: ModelParams, L, lam: float, Z, W: float) -> float:
    """Consumption rate ``(Z'LZ/2 + r phi W + lambda - log r) / phi``."""
    if params.phi <= 0:
        raise ParameterError("consumption needs phi > 0")
    L = _check_symmetric(L)
    Z = np.asarray(Z, dtype=float)
    quad = 0.5 * float(Z @ L @ Z)
    return (quad + params.r * params.phi * W + lam - math.log(params.r)) / params.phi
