"""Economy parameters, state dynamics and the price-rule loadings.

State vector ordering is ``Z = (1, D0, D1, I, Theta)`` and the diffusion
shocks are ordered ``(w0, wD, wI, wTheta)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

N_STATE = 5
N_SHOCK = 4
STATE_NAMES = ("1", "D0", "D1", "I", "Theta")

# row vector picking D = D0 + D1 out of Z
DIVIDEND_ROW = np.array([0.0, 1.0, 1.0, 0.0, 0.0])


class ParameterError(ValueError):
    """Raised when model parameters violate their admissible region."""


@dataclass(frozen=True)
class ModelParams:
    """Exogenous parameters of the noisy CARA economy (rates per year)."""

    r: float
    xi: float
    beta: float
    phi: float
    alpha_D: float
    alpha_I: float
    alpha_Theta: float
    sigma_0: float
    sigma_D: float
    sigma_I: float
    sigma_Theta: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ParameterError(f"{f.name} must be finite, got {v}")
        if self.r <= self.xi:
            raise ParameterError(f"need r > xi, got r={self.r}, xi={self.xi}")
        if self.alpha_D <= 0 or self.alpha_I <= 0:
            raise ParameterError("alpha_D and alpha_I must be positive")
        if self.alpha_Theta < 0:
            raise ParameterError("alpha_Theta must be non-negative")
        if self.phi <= 0:
            raise ParameterError("phi must be positive")
        for name in ("sigma_0", "sigma_D", "sigma_I", "sigma_Theta"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be non-negative")
        if self.sigma_0 == 0.0:
            if self.sigma_I != 0.0:
                raise ParameterError("sigma_I > 0 requires sigma_0 > 0")
        else:
            rho_from_sigmas(self.sigma_I, self.sigma_0)

    @classmethod
    def unchecked(cls, **values) -> "ModelParams":
        """Build without validation, for degenerate or limiting economies."""
        obj = object.__new__(cls)
        for f in fields(cls):
            object.__setattr__(obj, f.name, float(values[f.name]))
        return obj

    @property
    def r_eff(self) -> float:
        """Growth-adjusted discount rate ``r - xi``."""
        return self.r - self.xi

    @property
    def rho_I(self) -> float:
        if self.sigma_0 == 0.0:
            return 0.0
        return self.sigma_I**2 / (2.0 * self.sigma_0**2)

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PriceCoefficients:
    """Linear price rule ``P = p0 + pD0*D0 + pD1*D1 + pI*I + Theta``."""

    p0: float
    pD0: float
    pD1: float
    pI: float

    def __post_init__(self):
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ValueError(f"price coefficient {f.name} is not finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.p0, self.pD0, self.pD1, self.pI])

    def row(self) -> np.ndarray:
        """The 5-vector ``P_bar`` with the unit noise loading appended."""
        return np.array([self.p0, self.pD0, self.pD1, self.pI, 1.0])

    @classmethod
    def from_array(cls, a) -> "PriceCoefficients":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


@dataclass(frozen=True)
class SystemMatrices:
    A: np.ndarray
    Bhalf: np.ndarray

    @property
    def B(self) -> np.ndarray:
        return self.Bhalf @ self.Bhalf.T


@dataclass(frozen=True)
class ReturnLoadings:
    """Excess-return drift ``S``, diffusion row ``Thalf`` and variance ``T``."""

    S: np.ndarray
    Thalf: np.ndarray
    T: float


def state_vector(D0: float, D1: float, I: float, Theta: float) -> np.ndarray:
    return np.array([1.0, D0, D1, I, Theta])


def rho_from_sigmas(sigma_I: float, sigma_0: float) -> float:
    """Information loading ``rho_I = sigma_I**2 / (2 sigma_0**2)``.

    Raises
    ------
    ParameterError
        If ``sigma_0`` is zero or the result leaves ``[0, 2]``.
    """
    if sigma_0 == 0:
        raise ParameterError("sigma_0 must be non-zero")
    rho = sigma_I**2 / (2.0 * sigma_0**2)
    if not 0.0 <= rho <= 2.0:
        raise ParameterError(f"rho_I = {rho:.6g} outside [0, 2]")
    return rho


def build_system_matrices(params: ModelParams) -> SystemMatrices:
    """Drift ``A`` (5x5) and diffusion ``Bhalf`` (5x4) of ``dZ = AZ dt + Bhalf dw``."""
    p = params
    A = np.zeros((N_STATE, N_STATE))
    A[1, 3] = p.alpha_I
    A[2, 2] = -p.alpha_D
    A[3, 3] = -p.alpha_I
    A[4, 4] = -p.alpha_Theta

    rho = p.rho_I
    Bh = np.zeros((N_STATE, N_SHOCK))
    Bh[1, 0] = p.sigma_0
    Bh[2, 1] = p.sigma_D
    Bh[3, 0] = -rho * p.sigma_0
    # exactly zero at rho = 2
    Bh[3, 2] = math.sqrt(max(2.0 * rho - rho * rho, 0.0)) * p.sigma_0
    Bh[4, 3] = p.sigma_Theta
    return SystemMatrices(A, Bh)


def loadings_from_row(Pbar, r_eff, A, Bhalf):
    """Array-level version of :func:`return_loadings` (no validation)."""
    Pbar = np.asarray(Pbar, dtype=float)
    S = DIVIDEND_ROW - r_eff * Pbar + Pbar @ A
    Th = Pbar @ Bhalf
    return S, Th, float(Th @ Th)


def return_loadings(params: ModelParams, coeffs: PriceCoefficients) -> ReturnLoadings:
    """Loadings of the excess return ``dQ = S Z dt + Thalf dw``.

    The drift discounts at ``r - xi``: ``S = M - (r - xi) P_bar + P_bar A``.
    """
    sm = build_system_matrices(params)
    S, Th, T = loadings_from_row(coeffs.row(), params.r_eff, sm.A, sm.Bhalf)
    return ReturnLoadings(S=S, Thalf=Th, T=T)


def instantaneous_price_variance(params: ModelParams, coeffs: PriceCoefficients) -> float:
    """Instantaneous variance of ``dP`` per unit time, ``Thalf Thalf'``."""
    return return_loadings(params, coeffs).T


def table_params(phi: float = 0.5, sigma_Theta: float = 0.5, sigma_I: float = 0.4) -> ModelParams:
    """Calibration used for the candidate-equilibrium tables.

    ``sigma_I = 0.4`` with ``alpha_I = 0.1`` is the combination that
    reproduces the tabulated intercepts; pass ``sigma_I=1.0`` for the
    alternative listing where ``rho_I = 2``.
    """
    return ModelParams(
        r=0.05, xi=0.011, beta=0.30, phi=phi,
        alpha_D=0.50, alpha_I=0.10, alpha_Theta=0.05,
        sigma_0=0.50, sigma_D=0.10, sigma_I=sigma_I, sigma_Theta=sigma_Theta,
    )
