"""Exact discrete analog of the continuous state dynamics.

The filter state is ``(D0, I, D1, Theta)``; the constant of the 5-state
model is carried by the measurement intercept instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from ..model import ModelParams, PriceCoefficients, build_system_matrices

STATE_ORDER = ("D0", "I", "D1", "Theta")
# positions of (D0, I, D1, Theta) inside Z = (1, D0, D1, I, Theta)
_FROM_Z = np.array([1, 3, 2, 4])


@dataclass(frozen=True)
class StateSpaceModel:
    F: np.ndarray
    Omega: np.ndarray
    measurement_intercept: np.ndarray
    H: np.ndarray
    dt: float


def continuous_system(params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """4-state drift ``A_c`` and shock covariance ``Sigma``."""
    sm = build_system_matrices(params)
    idx = _FROM_Z
    return sm.A[np.ix_(idx, idx)], sm.B[np.ix_(idx, idx)]


def van_loan(A: np.ndarray, Sigma: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """``F = exp(A dt)`` and ``Omega = int_0^dt exp(sA) Sigma exp(sA') ds``.

    Uses the block exponential of ``[[-A, Sigma], [0, A']] dt``.
    """
    n = A.shape[0]
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = -A
    M[:n, n:] = Sigma
    M[n:, n:] = A.T
    E = expm(M * dt)
    F = E[n:, n:].T
    Omega = F @ E[:n, n:]
    return F, 0.5 * (Omega + Omega.T)


def measurement(coeffs: PriceCoefficients) -> tuple[np.ndarray, np.ndarray]:
    """Intercept ``(p0, 0)`` and loadings for rows ``(price, dividend)``."""
    c = np.array([coeffs.p0, 0.0])
    H = np.array([
        [coeffs.pD0, coeffs.pI, coeffs.pD1, 1.0],
        [1.0, 0.0, 1.0, 0.0],
    ])
    return c, H


def exact_discretize(params: ModelParams, coeffs: PriceCoefficients, dt: float = 1.0) -> StateSpaceModel:
    if not dt > 0:
        raise ValueError("dt must be positive")
    A, Sigma = continuous_system(params)
    F, Omega = van_loan(A, Sigma, dt)
    c, H = measurement(coeffs)
    return StateSpaceModel(F=F, Omega=Omega, measurement_intercept=c, H=H, dt=float(dt))


def stationary_covariance(F: np.ndarray, Omega: np.ndarray) -> np.ndarray:
    """Solve ``V = F V F' + Omega`` (requires a stable ``F``)."""
    from scipy.linalg import solve_discrete_lyapunov

    return solve_discrete_lyapunov(F, Omega)
