"""Maximum-likelihood estimation under constrained (Type A) or free (Type B) prices.

In Type A mode the slopes ``pD0, pD1, pI`` follow the efficient closed form
at each trial parameter vector and only the intercept ``p0`` is free. In
Type B mode all four price coefficients are free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from ..efficient import efficient_slopes
from ..model import ModelParams, ParameterError, PriceCoefficients
from ..series import ObservationSeries
from .discretize import exact_discretize
from .kalman import FilterBreakdown, FilterResult, filter_states, kalman_loglik

MODE_A = "typeA"
MODE_B = "typeB"
THETA_NAMES = ("alpha_D", "alpha_I", "alpha_Theta", "sigma_0", "sigma_D", "sigma_Theta", "rho_I")
SLOPE_NAMES = ("pD0", "pD1", "pI")

DEFAULT_THETA = {
    "alpha_D": 0.5, "alpha_I": 0.3, "alpha_Theta": 0.2,
    "sigma_0": 0.1, "sigma_D": 0.1, "sigma_Theta": 0.2, "rho_I": 0.5,
}
DEFAULT_BOUNDS = {
    "alpha_D": (1e-3, 10.0), "alpha_I": (1e-3, 10.0), "alpha_Theta": (1e-3, 10.0),
    "sigma_0": (1e-4, 10.0), "sigma_D": (1e-4, 10.0), "sigma_Theta": (1e-4, 10.0),
    "rho_I": (0.0, 2.0), "r": (None, 1.0),
    "p0": (-1e4, 1e4), "pD0": (-1e4, 1e4), "pD1": (-1e4, 1e4), "pI": (-1e4, 1e4),
}
# objective value standing in for an infeasible or broken filter
_PENALTY = 1e12


@dataclass(frozen=True)
class EstimationSpec:
    mode: str = MODE_B
    rate_mode: str = "fixed"
    r: float = 0.05
    xi: float = 0.0
    theta_init: dict = field(default_factory=lambda: dict(DEFAULT_THETA))
    coeff_init: PriceCoefficients | None = None
    bounds: dict = field(default_factory=dict)
    max_evals: int = 4000
    xatol: float = 1e-6
    fatol: float = 1e-8
    n_restarts: int = 3
    n_starts: int = 8
    start_evals: int = 2500
    seed: int = 0
    include_constant: bool = True
    prior: str = "mixed"

    def __post_init__(self):
        if self.mode not in (MODE_A, MODE_B):
            raise ValueError(f"mode must be {MODE_A!r} or {MODE_B!r}")
        if self.rate_mode not in ("fixed", "free"):
            raise ValueError("rate_mode must be 'fixed' or 'free'")
        if not self.r > self.xi:
            raise ValueError("need r > xi")
        unknown = set(self.theta_init) - set(THETA_NAMES) - {"r"}
        if unknown:
            raise ValueError(f"unknown theta keys: {sorted(unknown)}")
        if self.max_evals < 1 or self.n_restarts < 0:
            raise ValueError("max_evals must be >= 1 and n_restarts >= 0")
        if self.n_starts < 1 or self.start_evals < 1:
            raise ValueError("n_starts and start_evals must be >= 1")

    @property
    def names(self) -> tuple[str, ...]:
        names = THETA_NAMES + (("r",) if self.rate_mode == "free" else ()) + ("p0",)
        return names + (SLOPE_NAMES if self.mode == MODE_B else ())

    def bound_list(self) -> list[tuple[float, float]]:
        out = []
        for n in self.names:
            lo, hi = self.bounds.get(n, DEFAULT_BOUNDS[n])
            if n == "r" and lo is None:
                lo = self.xi + 1e-4
            if n == "rho_I":
                lo, hi = max(lo, 0.0), min(hi, 2.0)
            out.append((float(lo), float(hi)))
        return out


@dataclass
class EstimationResult:
    theta_hat: dict
    coeffs_hat: PriceCoefficients
    loglik: float
    filtered_states: FilterResult | None
    converged: bool
    n_evals: int
    mode: str
    x: np.ndarray
    names: tuple

    def params(self, xi: float, r: float) -> ModelParams:
        return params_from_theta(self.theta_hat, xi=xi, r=self.theta_hat.get("r", r))


def params_from_theta(theta: dict, xi: float, r: float, beta: float = 0.3, phi: float = 1.0) -> ModelParams:
    """Economy for a parameter vector; ``sigma_I`` follows from ``rho_I``."""
    s0 = theta["sigma_0"]
    return ModelParams(
        r=r, xi=xi, beta=beta, phi=phi,
        alpha_D=theta["alpha_D"], alpha_I=theta["alpha_I"], alpha_Theta=theta["alpha_Theta"],
        sigma_0=s0, sigma_D=theta["sigma_D"],
        sigma_I=s0 * math.sqrt(2.0 * max(theta["rho_I"], 0.0)),
        sigma_Theta=theta["sigma_Theta"],
    )


def _unpack(x, spec: EstimationSpec):
    vals = dict(zip(spec.names, (float(v) for v in x)))
    r = vals.get("r", spec.r)
    params = params_from_theta(vals, xi=spec.xi, r=r)
    if spec.mode == MODE_A:
        pD0, pD1, pI = efficient_slopes(params.r_eff, params.alpha_D, params.alpha_I)
    else:
        pD0, pD1, pI = vals["pD0"], vals["pD1"], vals["pI"]
    return vals, params, PriceCoefficients(vals["p0"], pD0, pD1, pI)


def loglik_at(x, series: ObservationSeries, spec: EstimationSpec) -> float:
    """Log-likelihood at a packed parameter vector (``-inf`` when infeasible)."""
    try:
        _, params, coeffs = _unpack(x, spec)
        model = exact_discretize(params, coeffs, series.dt)
        ll = kalman_loglik(model, series, include_constant=spec.include_constant, prior=spec.prior)
    except (ParameterError, FilterBreakdown, ValueError, np.linalg.LinAlgError):
        return -math.inf
    return ll if math.isfinite(ll) else -math.inf


def initial_vector(series: ObservationSeries, spec: EstimationSpec) -> np.ndarray:
    theta = dict(DEFAULT_THETA, **spec.theta_init)
    r = theta.pop("r", spec.r)
    params = params_from_theta(theta, xi=spec.xi, r=r)
    if spec.coeff_init is not None:
        slopes = (spec.coeff_init.pD0, spec.coeff_init.pD1, spec.coeff_init.pI)
        p0 = spec.coeff_init.p0
    else:
        slopes = efficient_slopes(params.r_eff, params.alpha_D, params.alpha_I)
        if spec.mode == MODE_B and len(series) > 2 and np.ptp(series.dividend) > 0:
            # price and dividend share the D0 random walk, so the OLS slope
            # of price on dividend estimates pD0 consistently
            slopes = (float(np.polyfit(series.dividend, series.price, 1)[0]),) + slopes[1:]
        # price minus pD0 * dividend only has stationary zero-mean parts left
        p0 = float(np.mean(series.price - slopes[0] * series.dividend))
    vals = dict(theta, r=r, p0=p0, pD0=slopes[0], pD1=slopes[1], pI=slopes[2])
    return np.array([vals[n] for n in spec.names], dtype=float)


def _scatter(x0: np.ndarray, spec: EstimationSpec, rng, lo, hi) -> np.ndarray:
    """A random start around ``x0``: log-scale moves for rates and volatilities."""
    x = x0.copy()
    for i, n in enumerate(spec.names):
        if n.startswith(("alpha_", "sigma_")):
            x[i] = x0[i] * math.exp(rng.uniform(-1.5, 1.5))
        elif n == "rho_I":
            x[i] = rng.uniform(0.05, 1.95)
    return np.clip(x, lo, hi)


def _swap_rates(x: np.ndarray, spec: EstimationSpec, lo, hi):
    """``x`` with the I and Theta mean-reversion rates exchanged, or None.

    Both factors enter the price as Ornstein-Uhlenbeck components, so a
    simplex often settles with their roles swapped: a fast I carrying a
    large ``pI`` against a near unit-root Theta. Starting once from the
    exchanged rates lets the search cross over to the other labelling.
    """
    names = spec.names
    if "alpha_I" not in names or "alpha_Theta" not in names:
        return None
    i, j = names.index("alpha_I"), names.index("alpha_Theta")
    y = x.copy()
    y[i], y[j] = x[j], x[i]
    return np.clip(y, lo, hi)


def estimate_ml(
    series: ObservationSeries, spec: EstimationSpec, x0=None, keep_states: bool = True, extra_starts=()
) -> EstimationResult:
    """Bounded Nelder-Mead on the Kalman log-likelihood, multi-started and restarted.

    Stage one runs a short simplex (``start_evals``) from the initial
    vector, from any ``extra_starts`` and from ``n_starts - 1`` seeded
    random scatters taken in turn around each of those. Stage
    two polishes the best of those with up to ``max_evals`` evaluations and
    then ``n_restarts`` times re-opens the simplex after a small jitter.
    The best point found is returned even when the evaluation cap was hit;
    ``converged`` reports the last polish.
    """
    bounds = spec.bound_list()
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    x_init = np.clip(initial_vector(series, spec) if x0 is None else np.asarray(x0, float), lo, hi)

    def objective(x):
        ll = loglik_at(x, series, spec)
        return -ll if math.isfinite(ll) else _PENALTY

    def run(start, maxfev):
        return minimize(
            objective, start, method="Nelder-Mead", bounds=bounds,
            options={"maxfev": maxfev, "xatol": spec.xatol, "fatol": spec.fatol, "adaptive": True},
        )

    rng = np.random.default_rng(spec.seed)
    x_best, f_best = x_init, objective(x_init)
    n_evals = 1
    extra = [np.clip(np.asarray(e, float), lo, hi) for e in extra_starts]
    if spec.n_starts > 1 or extra:
        centres = [x_init] + extra
        starts = centres + [
            _scatter(centres[k % len(centres)], spec, rng, lo, hi) for k in range(spec.n_starts - 1)
        ]
        for start in starts:
            res = run(start, spec.start_evals)
            n_evals += int(res.nfev)
            if res.fun < f_best:
                x_best, f_best = np.asarray(res.x), float(res.fun)
        swapped = _swap_rates(x_best, spec, lo, hi)
        if swapped is not None:
            res = run(swapped, spec.start_evals)
            n_evals += int(res.nfev)
            if res.fun < f_best:
                x_best, f_best = np.asarray(res.x), float(res.fun)

    converged = False
    for k in range(spec.n_restarts + 1):
        start = x_best
        if k > 0:
            jitter = 0.05 * np.maximum(np.abs(x_best), 1e-2) * rng.standard_normal(len(x_best))
            start = np.clip(x_best + jitter, lo, hi)
        res = run(start, spec.max_evals)
        n_evals += int(res.nfev)
        converged = bool(res.success)
        if res.fun <= f_best:
            x_best, f_best = np.asarray(res.x), float(res.fun)

    vals, params, coeffs = _unpack(x_best, spec)
    ll = loglik_at(x_best, series, spec)
    filtered = None
    if keep_states and math.isfinite(ll):
        filtered = filter_states(
            exact_discretize(params, coeffs, series.dt), series, spec.include_constant, prior=spec.prior
        )
    theta = {n: vals[n] for n in spec.names if n not in ("p0",) + SLOPE_NAMES}
    return EstimationResult(
        theta_hat=theta, coeffs_hat=coeffs, loglik=ll, filtered_states=filtered,
        converged=converged and math.isfinite(ll), n_evals=n_evals, mode=spec.mode,
        x=x_best, names=spec.names,
    )


def estimate_nested(series: ObservationSeries, spec: EstimationSpec) -> tuple[EstimationResult, EstimationResult]:
    """Fit Type A, then Type B started from the Type A optimum.

    The Type A optimum is the first start of the Type B multi-start, so
    ``loglik_B >= loglik_A`` holds by construction: no stage ever returns
    a point worse than its starting point.
    """
    res_a = estimate_ml(series, replace(spec, mode=MODE_A), keep_states=False)
    c = res_a.coeffs_hat
    vals = dict(zip(res_a.names, res_a.x))
    vals.update(pD0=c.pD0, pD1=c.pD1, pI=c.pI)
    spec_b = replace(spec, mode=MODE_B)
    x0 = np.array([vals[n] for n in spec_b.names])
    extra = [initial_vector(series, spec_b)]
    for slow, fast in (("alpha_I", "alpha_Theta"), ("alpha_Theta", "alpha_I")):
        # one factor an order of magnitude slower than the other, both ways round
        init = dict(spec_b.theta_init, **{slow: 0.1, fast: 1.0})
        extra.append(initial_vector(series, replace(spec_b, theta_init=init)))
    res_b = estimate_ml(series, spec_b, x0=x0, keep_states=False, extra_starts=extra)
    return res_a, res_b
