"""Closed-form efficient price and the Type A / Type B classifier."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams, ParameterError, PriceCoefficients

TYPE_A = "TypeA"
TYPE_B = "TypeB"
DEFAULT_CLASS_TOL = 1e-4


@dataclass(frozen=True)
class EquilibriumClass:
    tag: str
    max_coeff_deviation: float

    @property
    def is_efficient(self) -> bool:
        return self.tag == TYPE_A


def efficient_slopes(r_eff: float, alpha_D: float, alpha_I: float) -> tuple[float, float, float]:
    """``(pD0, pD1, pI)`` of the discounted-dividend price at rate ``r_eff``."""
    if r_eff <= 0:
        raise ParameterError("efficient price needs r > xi")
    pD0 = 1.0 / r_eff
    pD1 = 1.0 / (r_eff + alpha_D)
    pI = 1.0 / r_eff - 1.0 / (r_eff + alpha_I)
    return pD0, pD1, pI


def efficient_pI_product_form(r_eff: float, alpha_I: float) -> float:
    """Same value as the difference form, written ``alpha_I / (r_eff (r_eff + alpha_I))``."""
    return alpha_I / (r_eff * (r_eff + alpha_I))


def efficient_intercept(params: ModelParams) -> float:
    """Closed-form risk discount ``p0`` of the efficient price.

    It prices dividend and information risk only; the noise-trader
    hedging term is not included, so the intercept an exact equilibrium
    solve returns differs from this value by a small amount.
    """
    p = params
    re = p.r_eff
    rho = p.rho_I
    info = ((re + p.alpha_I) ** 2 - 2.0 * re * p.alpha_I * rho) * p.sigma_0**2 / (
        re**2 * (re + p.alpha_I) ** 2
    )
    trans = p.sigma_D**2 / (re + p.alpha_D) ** 2
    return -(info + trans) * (p.r / re) * p.phi


def efficient_coefficients(params: ModelParams) -> PriceCoefficients:
    if params.r <= params.xi:
        raise ParameterError("efficient price needs r > xi")
    pD0, pD1, pI = efficient_slopes(params.r_eff, params.alpha_D, params.alpha_I)
    return PriceCoefficients(efficient_intercept(params), pD0, pD1, pI)


def classify(
    candidate: PriceCoefficients,
    params: ModelParams,
    tol: float = DEFAULT_CLASS_TOL,
    include_intercept: bool = False,
) -> EquilibriumClass:
    """Label a price rule efficient (Type A) or not (Type B).

    By default only the three slopes are compared; the intercept is
    checked too when ``include_intercept`` is set.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    eff = efficient_coefficients(params).as_array()
    dev = np.abs(candidate.as_array() - eff)
    if not include_intercept:
        dev = dev[1:]
    worst = float(dev.max())
    return EquilibriumClass(TYPE_A if worst <= tol else TYPE_B, worst)
