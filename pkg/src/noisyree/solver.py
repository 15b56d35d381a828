"""Multi-start Newton search for candidate equilibria, ranking and sweeps.

The unknowns are the four price coefficients and the 15 distinct entries
of the symmetric value-function matrix ``L``. The equations are the 15
upper-triangle Riccati entries plus the market-clearing conditions on the
constant, ``D0``, ``D1`` and ``I`` loadings of demand. The Theta
component of clearing is reported (``noise_clearing_gap``) but is not
imposed by default: together with the Riccati equations it admits no
exact roots (see ``SolverConfig.impose_noise_clearing``).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import solve_continuous_are

from . import kernels
from .efficient import (
    DEFAULT_CLASS_TOL,
    TYPE_A,
    TYPE_B,
    EquilibriumClass,
    classify,
    efficient_coefficients,
)
from .model import ModelParams, PriceCoefficients, build_system_matrices, return_loadings
from .riccati import (
    build_riccati_blocks,
    clearing_residual,
    essential_utility,
    lambda_closed_form,
    riccati_residual,
)

STATUS_NAMES = {0: "converged", 1: "max_iter", 2: "stalled", 3: "non_finite"}
# isolated roots sit near 1e-5..1e-9 relative conditioning, families below 1e-20
FAMILY_RCOND = 1e-15


@dataclass(frozen=True)
class SolverConfig:
    n_starts: int = 1000
    coeff_range: tuple[float, float] = (-10.0, 10.0)
    L_range: tuple[float, float] = (-10.0, 10.0)
    coeff_scale: float = 1.0
    newton_max_iter: int = 150
    residual_tol: float = 1e-8
    dedupe_tol: float = 1e-5
    rng_seed: int = 0
    max_halvings: int = 30
    class_tol: float = DEFAULT_CLASS_TOL
    closed_form_start: bool = True
    impose_noise_clearing: bool = False

    def __post_init__(self):
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        if not self.residual_tol > 0 or not self.dedupe_tol > 0:
            raise ValueError("residual_tol and dedupe_tol must be positive")
        for name in ("coeff_range", "L_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must be an increasing interval")
        if self.newton_max_iter < 1 or self.max_halvings < 0:
            raise ValueError("iteration limits must be positive")

    @property
    def clear_mask(self) -> np.ndarray:
        return np.array([True, True, True, True, self.impose_noise_clearing])


@dataclass(frozen=True)
class StartDiagnostic:
    index: int
    status: str
    iterations: int
    residual: float


@dataclass(frozen=True)
class CandidateEquilibrium:
    coeffs: PriceCoefficients
    L: np.ndarray
    lam: float
    essential_utility: float
    riccati_residual_norm: float
    clearing_residual_norm: float
    noise_clearing_gap: float
    T_value: float
    eq_class: EquilibriumClass
    # on a one-parameter family of roots along which p0 is free
    p0_indeterminate: bool = False

    @property
    def l11(self) -> float:
        return float(self.L[0, 0])

    def as_record(self) -> dict:
        c = self.coeffs
        return {
            "class": self.eq_class.tag,
            "utility": self.essential_utility,
            "p0": c.p0,
            "pD0": c.pD0,
            "pD1": c.pD1,
            "pI": c.pI,
            "lambda": self.lam,
            "l11": self.l11,
            "riccati_residual": self.riccati_residual_norm,
            "clearing_residual": self.clearing_residual_norm,
            "noise_clearing_gap": self.noise_clearing_gap,
            "T": self.T_value,
            "max_coeff_deviation": self.eq_class.max_coeff_deviation,
            "p0_indeterminate": self.p0_indeterminate,
        }


@dataclass
class SolveReport:
    candidates: list[CandidateEquilibrium]
    diagnostics: list[StartDiagnostic] = field(default_factory=list)


def _starting_points(params: ModelParams, config: SolverConfig) -> np.ndarray:
    rng = np.random.default_rng(config.rng_seed)
    n = config.n_starts
    clo, chi = config.coeff_range
    llo, lhi = config.L_range
    coef = rng.uniform(clo, chi, size=(n, kernels.N_COEF)) * config.coeff_scale
    Ls = rng.uniform(llo, lhi, size=(n, kernels.N_TRI))
    x0 = np.hstack([coef, Ls])
    if config.closed_form_start:
        first = _closed_form_start(params)
        if first is not None:
            x0 = np.vstack([first[None, :], x0])
    return x0


def _closed_form_start(params: ModelParams) -> np.ndarray | None:
    """Efficient coefficients with ``L`` from the stabilizing Riccati solution.

    ``L U L - L X - X' L - Y = 0`` is a standard continuous algebraic
    Riccati equation with drift ``X``, quadratic term ``U`` and constant
    ``Y``. Falls back to ``L = 0`` when that solver fails.
    """
    try:
        coeffs = efficient_coefficients(params)
        blocks = build_riccati_blocks(params, coeffs)
    except ValueError:
        return None
    try:
        w, V = np.linalg.eigh(blocks.U)
        G = V * np.sqrt(np.clip(w, 0.0, None))
        L = solve_continuous_are(blocks.X, G, blocks.Y, np.eye(G.shape[1]))
        if not np.all(np.isfinite(L)):
            raise ValueError
    except (ValueError, np.linalg.LinAlgError):
        L = np.zeros((5, 5))
    L = 0.5 * (L + L.T)
    return np.concatenate([coeffs.as_array(), L[np.triu_indices(5)]])


def check_candidate(
    params: ModelParams, coeffs: PriceCoefficients, L: np.ndarray, impose_noise_clearing: bool = False
) -> tuple[float, float, float]:
    """Independent re-substitution: ``(riccati_inf, clearing_inf, theta_gap)``.

    ``clearing_inf`` covers the imposed clearing components only.
    """
    R = riccati_residual(L, build_riccati_blocks(params, coeffs))
    c = clearing_residual(params, coeffs, L)
    imposed = c if impose_noise_clearing else c[:4]
    return float(np.abs(R).max()), float(np.abs(imposed).max()), float(c[4])


def _build_candidate(params, x, config) -> CandidateEquilibrium | None:
    ti, tj = kernels.tri_indices()
    if not np.all(np.isfinite(x)):
        return None
    coeffs = PriceCoefficients.from_array(x[:4])
    L = np.asarray(kernels.unpack_L(x, ti, tj))
    T = return_loadings(params, coeffs).T
    if not T > 0:
        return None
    ric, clr, gap = check_candidate(params, coeffs, L, config.impose_noise_clearing)
    if not (ric <= config.residual_tol and clr <= config.residual_tol):
        return None
    lam = lambda_closed_form(params, L)
    sm = build_system_matrices(params)
    _, J = kernels.equilibrium_residual_jacobian(
        x, sm.A, sm.Bhalf, params.r_eff, params.r, params.phi, config.clear_mask, ti, tj
    )
    sv = np.linalg.svd(J, compute_uv=False)
    return CandidateEquilibrium(
        coeffs=coeffs,
        L=L,
        lam=lam,
        essential_utility=essential_utility(L, lam),
        riccati_residual_norm=ric,
        clearing_residual_norm=clr,
        noise_clearing_gap=gap,
        T_value=float(T),
        eq_class=classify(coeffs, params, config.class_tol),
        p0_indeterminate=bool(sv[-1] <= FAMILY_RCOND * sv[0]),
    )


def solve_report(params: ModelParams, config: SolverConfig = SolverConfig()) -> SolveReport:
    """Like :func:`solve_candidates` but also returns per-start diagnostics."""
    sm = build_system_matrices(params)
    ti, tj = kernels.tri_indices()
    mask = config.clear_mask
    # polish past the acceptance tolerance so re-substitution has headroom
    newton_tol = 0.01 * config.residual_tol

    diags: list[StartDiagnostic] = []
    roots = []
    for i, x0 in enumerate(_starting_points(params, config)):
        x, fmax, it, status = kernels.damped_newton(
            x0, sm.A, sm.Bhalf, params.r_eff, params.r, params.phi, mask, ti, tj,
            config.newton_max_iter, newton_tol, config.max_halvings,
        )
        if status == 2 and fmax <= config.residual_tol:
            status = 0  # stalled only at rounding level
        diags.append(StartDiagnostic(i, STATUS_NAMES[status], int(it), float(fmax)))
        if status == 0:
            roots.append(np.asarray(x))

    # canonical order makes dedupe independent of start order
    roots.sort(key=lambda v: tuple(np.round(v, 8)))
    kept: list[np.ndarray] = []
    for x in roots:
        if all(np.abs(x - q).max() >= config.dedupe_tol for q in kept):
            kept.append(x)

    cands = [c for c in (_build_candidate(params, x, config) for x in kept) if c is not None]
    cands.sort(key=lambda c: -c.essential_utility)
    return SolveReport(cands, diags)


def solve_candidates(params: ModelParams, config: SolverConfig = SolverConfig()) -> list[CandidateEquilibrium]:
    """All distinct candidate equilibria found, best essential utility first."""
    return solve_report(params, config).candidates


def _root_vector(c: CandidateEquilibrium) -> np.ndarray:
    iu = np.triu_indices(5)
    return np.concatenate([c.coeffs.as_array(), c.L[iu]])


def family_peak(
    params: ModelParams, cand: CandidateEquilibrium, config: SolverConfig = SolverConfig(), span: float = 100.0
) -> CandidateEquilibrium:
    """Member of a p0-indeterminate family with the highest essential utility.

    Along such a family the slopes and the lower-right block of ``L`` are
    fixed, row 0 of ``L`` moves linearly with ``p0`` and the essential
    utility is a quadratic in ``p0``. Three re-solved members fix the
    quadratic; the vertex is re-solved and returned. Returns ``cand``
    itself if it is not on a family or the quadratic opens upward.
    """
    if not cand.p0_indeterminate:
        return cand
    sm = build_system_matrices(params)
    ti, tj = kernels.tri_indices()
    x = _root_vector(cand)
    _, J = kernels.equilibrium_residual_jacobian(
        x, sm.A, sm.Bhalf, params.r_eff, params.r, params.phi, config.clear_mask, ti, tj
    )
    direction = np.linalg.svd(J)[2][-1]
    direction = direction / direction[0]

    def member(p0_shift):
        xs, fmax, _, status = kernels.damped_newton(
            x + p0_shift * direction, sm.A, sm.Bhalf, params.r_eff, params.r, params.phi,
            config.clear_mask, ti, tj, config.newton_max_iter, 0.01 * config.residual_tol, config.max_halvings,
        )
        return _build_candidate(params, np.asarray(xs), config)

    pts = [member(s) for s in (-span, 0.0, span)]
    if any(p is None for p in pts):
        return cand
    p0s = np.array([p.coeffs.p0 for p in pts])
    us = np.array([p.essential_utility for p in pts])
    a, b, _ = np.polyfit(p0s, us, 2)
    if not a < 0:
        return cand
    peak = member(-b / (2.0 * a) - cand.coeffs.p0)
    if peak is None or peak.essential_utility < cand.essential_utility:
        return cand
    return peak


def best_by_class(cands: list[CandidateEquilibrium]) -> dict[str, CandidateEquilibrium | None]:
    out: dict[str, CandidateEquilibrium | None] = {TYPE_A: None, TYPE_B: None}
    for c in cands:
        cur = out[c.eq_class.tag]
        if cur is None or c.essential_utility > cur.essential_utility:
            out[c.eq_class.tag] = c
    return out


@dataclass(frozen=True)
class SweepRecord:
    phi: float
    sigma_Theta: float
    best_typeA_utility: float | None
    best_typeB_utility: float | None
    dominant: str
    n_candidates: int
    error: str = ""


def sweep_node(params_base: ModelParams, phi: float, sigma_Theta: float, config: SolverConfig) -> SweepRecord:
    try:
        params = params_base.replace(phi=phi, sigma_Theta=sigma_Theta)
        cands = solve_candidates(params, config)
    except ValueError as exc:
        return SweepRecord(phi, sigma_Theta, None, None, "none", 0, str(exc))
    best = best_by_class(cands)
    ua = best[TYPE_A].essential_utility if best[TYPE_A] else None
    ub = best[TYPE_B].essential_utility if best[TYPE_B] else None
    dominant = cands[0].eq_class.tag if cands else "none"
    return SweepRecord(phi, sigma_Theta, ua, ub, dominant, len(cands))


def sweep(params_base: ModelParams, phi_grid, sigma_theta_grid, config: SolverConfig = SolverConfig()) -> list[SweepRecord]:
    """Solve at every ``(phi, sigma_Theta)`` node; row-major over ``phi``."""
    phi_grid = list(phi_grid)
    sigma_theta_grid = list(sigma_theta_grid)
    if not phi_grid or not sigma_theta_grid:
        raise ValueError("grids must be non-empty")
    return [sweep_node(params_base, f, s, config) for f in phi_grid for s in sigma_theta_grid]


CANDIDATE_FIELDS = [
    "class", "utility", "p0", "pD0", "pD1", "pI", "lambda", "l11",
    "riccati_residual", "clearing_residual", "noise_clearing_gap", "T", "max_coeff_deviation",
    "p0_indeterminate",
]
SWEEP_FIELDS = ["phi", "sigma_Theta", "best_typeA_utility", "best_typeB_utility", "dominant", "n_candidates", "error"]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def _write_csv(rows, fieldnames) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r[k]) for k in fieldnames})
    return buf.getvalue()


def candidates_to_csv(cands: list[CandidateEquilibrium]) -> str:
    return _write_csv([c.as_record() for c in cands], CANDIDATE_FIELDS)


def sweep_to_csv(records: list[SweepRecord]) -> str:
    return _write_csv([asdict(r) for r in records], SWEEP_FIELDS)


def candidates_to_json(params: ModelParams, cands: list[CandidateEquilibrium]) -> str:
    doc = {
        "params": params.to_dict(),
        "candidates": [{**c.as_record(), "L": c.L.tolist()} for c in cands],
    }
    return json.dumps(doc, indent=2)
