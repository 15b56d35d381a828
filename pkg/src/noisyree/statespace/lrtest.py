"""Likelihood-ratio comparison of the constrained and free price models."""

from __future__ import annotations

from dataclasses import dataclass

from scipy.stats import chi2

LEVELS = (0.05, 0.01, 0.001)
# the three-degree-of-freedom values as tabulated, kept to two decimals
PRINTED_DOF3 = (7.82, 11.35, 16.27)


@dataclass(frozen=True)
class LRResult:
    statistic: float
    dof: int
    thresholds: dict
    decision: str

    @property
    def rejected(self) -> bool:
        return self.decision != "no rejection"


def critical_values(dof: int) -> dict:
    if dof == 3:
        return dict(zip(LEVELS, PRINTED_DOF3))
    return {a: float(chi2.ppf(1.0 - a, dof)) for a in LEVELS}


def lr_test(loglik_A: float, loglik_B: float, dof: int = 3) -> LRResult:
    """``-2 (loglik_A - loglik_B)`` against chi-square critical values.

    A negative statistic is returned unchanged; it means the free model
    fit worse than the restricted one.
    """
    if dof < 1:
        raise ValueError("dof must be >= 1")
    stat = 2.0 * (loglik_B - loglik_A)
    crit = critical_values(dof)
    decision = "no rejection"
    for a in LEVELS:
        if stat > crit[a]:
            decision = f"reject at {a * 100:g}%"
    return LRResult(statistic=stat, dof=dof, thresholds=crit, decision=decision)
