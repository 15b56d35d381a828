"""Acceptance suite: one summary line per criterion, at the stated tolerances.

The lines are collected in ``conftest.ACCEPTANCE_LINES`` and printed in
the pytest terminal summary under "acceptance criteria". Criteria that
cannot be met as stated are still computed in full, reported as FAIL and
marked ``xfail(strict=True)`` so that an unexpected pass is noticed.
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from noisyree.efficient import TYPE_A, TYPE_B, efficient_coefficients, efficient_slopes
from noisyree.marketdata import (
    annual_sample, cointegrating_ols, detrend_and_normalize, estimate_growth_rate, load_csv, restore_levels,
    RawSeries,
)
from noisyree.model import PriceCoefficients, table_params
from noisyree.riccati import build_riccati_blocks, clearing_residual, riccati_residual
from noisyree.solver import SolverConfig, solve_candidates
from noisyree.statespace import (
    EstimationSpec, continuous_system, estimate_nested, exact_discretize, kalman_loglik, lr_test,
    params_from_theta, simulate, van_loan,
)
from noisyree.statespace.kalman import initial_covariance
from noisyree.cli import compare_reports, result_report

from conftest import ACCEPTANCE_LINES, random_params
from oracles import brute_loglik, omega_quad, series_expm

pytestmark = pytest.mark.acceptance


def report(n, ok: bool, detail: str) -> bool:
    ACCEPTANCE_LINES.append(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


# economy used by the recovery and size checks (rates per year, dt = 1)
RECOVERY_THETA = {
    "alpha_D": 1.0, "alpha_I": 0.05, "alpha_Theta": 1.5,
    "sigma_0": 0.05, "sigma_D": 0.2, "sigma_Theta": 1.0, "rho_I": 1.9,
}
RECOVERY_COEFFS = PriceCoefficients(-2.0, 8.0, 1.0, 5.0)
RECOVERY_R = 0.05
RECOVERED = ("alpha_D", "alpha_I", "alpha_Theta", "sigma_Theta")


# ------------------------------------------------------------------ 1


def test_criterion_1_efficient_coefficients():
    c = efficient_coefficients(table_params())
    got = np.array([c.pD0, c.pD1, c.pI])
    err = np.abs(got - [25.641, 1.855, 18.446]).max()
    assert report(1, err <= 1e-3, f"(pD0, pD1, pI) = {np.round(got, 4).tolist()}, max |err| {err:.1e} <= 1e-3")


# ------------------------------------------------------------------ 2


@pytest.fixture(scope="module")
def table1_search():
    t0 = time.perf_counter()
    cands = solve_candidates(table_params(), SolverConfig(n_starts=1000, rng_seed=0))
    return cands, time.perf_counter() - t0


def _type_a_match(cands):
    eff = efficient_coefficients(table_params()).as_array()[1:]
    for c in cands:
        if c.eq_class.tag == TYPE_A and np.abs(c.coeffs.as_array()[1:] - eff).max() <= 1e-4:
            return c
    return None


def test_criterion_2_solver_finds_closed_form(table1_search):
    cands, secs = table1_search
    p = table_params()
    c = _type_a_match(cands)
    assert c is not None, report(2, False, "no TypeA candidate within 1e-4 of the efficient slopes")
    ric = np.abs(riccati_residual(c.L, build_riccati_blocks(p, c.coeffs))).max()
    clr = np.abs(clearing_residual(p, c.coeffs, c.L)[:4]).max()
    ok = ric <= 1e-8 and clr <= 1e-8 and secs < 60.0
    assert report(
        2, ok,
        f"TypeA slopes match to 1e-4; riccati |res| {ric:.1e}, clearing |res| {clr:.1e} "
        f"(constant, D0, D1, I rows); 1000 starts in {secs:.1f} s",
    )


@pytest.mark.xfail(strict=True, reason="the noise-supply clearing row has no exact root; see decisions ledger")
def test_criterion_2_noise_clearing_row(table1_search):
    cands, _ = table1_search
    c = _type_a_match(cands)
    gap = abs(clearing_residual(table_params(), c.coeffs, c.L)[4])
    assert report("2b", gap <= 1e-8, f"noise-supply clearing row |res| {gap:.3e} (target 1e-8)")


# ------------------------------------------------------------------ 3


def _dominant(phi, sigma_Theta):
    p = table_params().replace(phi=phi, sigma_Theta=sigma_Theta)
    cands = solve_candidates(p, SolverConfig(n_starts=1000, rng_seed=0))
    return cands[0].eq_class.tag, cands[0].essential_utility


@pytest.fixture(scope="module")
def dominance():
    t0 = time.perf_counter()
    nodes = [(0.5, 0.5), (1.0, 0.5), (0.5, 1.0)]
    res = {n: _dominant(*n) for n in nodes}
    return res, time.perf_counter() - t0


def test_criterion_3_ordering_first_two_nodes(dominance):
    res, secs = dominance
    ok = res[(0.5, 0.5)][0] == TYPE_A and res[(1.0, 0.5)][0] == TYPE_B and secs < 300
    detail = ", ".join(f"{k}: {v[0]} {v[1]:.3f}" for k, v in list(res.items())[:2])
    assert report("3a", ok, f"{detail} (expected TypeA, TypeB); three searches in {secs:.0f} s")


@pytest.mark.xfail(strict=True, reason="seed-0 search at (0.5, 1.0) ranks TypeA first; see decisions ledger")
def test_criterion_3_ordering_third_node(dominance):
    res, _ = dominance
    tag, u = res[(0.5, 1.0)]
    assert report("3b", tag == TYPE_B, f"(0.5, 1.0): {tag} {u:.3f} (expected TypeB)")


# ------------------------------------------------------------------ 4


def test_criterion_4_exact_discretization():
    rng = np.random.default_rng(2024)
    f_err = om_err = semi_f = semi_om = 0.0
    for _ in range(1000):
        p = random_params(rng)
        dt = rng.uniform(0.1, 2.0)
        A, S = continuous_system(p)
        F, Om = van_loan(A, S, dt)
        F2, Om2 = van_loan(A, S, 2.0 * dt)
        f_err = max(f_err, np.abs(F - series_expm(A * dt)).max())
        om_err = max(om_err, np.abs(Om - omega_quad(A, S, dt)).max())
        semi_f = max(semi_f, np.abs(F2 - F @ F).max())
        semi_om = max(semi_om, np.abs(Om2 - (F @ Om @ F.T + Om)).max())
    ok = f_err <= 1e-10 and om_err <= 1e-9 and semi_f <= 1e-10 and semi_om <= 1e-10
    assert report(
        4, ok,
        f"1000 draws: F vs series {f_err:.1e}, Omega vs quadrature {om_err:.1e}, "
        f"semigroup F {semi_f:.1e}, Omega {semi_om:.1e}",
    )


# ------------------------------------------------------------------ 5


def test_criterion_5_kalman_brute_force():
    rng = np.random.default_rng(77)
    worst = 0.0
    for k in range(100):
        p = random_params(rng)
        m = exact_discretize(p, PriceCoefficients(*rng.uniform(-5, 5, 4)), rng.uniform(0.25, 2.0))
        T = 1 + k % 5
        y = simulate(m, T=T, seed=k).observations()
        for prior in ("diffuse", "mixed"):
            ref = brute_loglik(m, y, initial_covariance(m, prior))
            worst = max(worst, abs(kalman_loglik(m, y, prior=prior) - ref))
    assert report(5, worst <= 1e-8, f"100 models, T <= 5, both priors: max |diff| {worst:.1e} <= 1e-8")


# ------------------------------------------------------------------ 6


def test_criterion_6_lr_arithmetic():
    a = lr_test(540.96, 636.39, 3)
    b = lr_test(100.0, 100.0, 3)
    ok = abs(a.statistic - 190.86) < 1e-9 and a.decision == "reject at 0.1%" and b.statistic == 0.0
    assert report(6, ok, f"statistic {a.statistic:.2f} ({a.decision}); equal inputs give {b.statistic:g}")


# ------------------------------------------------------------------ 7


def test_criterion_7_estimation_recovery():
    p = params_from_theta(RECOVERY_THETA, xi=0.0, r=RECOVERY_R)
    model = exact_discretize(p, RECOVERY_COEFFS, 1.0)
    spec = EstimationSpec(r=RECOVERY_R, xi=0.0)
    errs, gaps = [], []
    t0 = time.perf_counter()
    for seed in range(20):
        ys = simulate(model, T=300, seed=seed)
        res_a, res_b = estimate_nested(ys, spec)
        errs.append([abs(res_b.theta_hat[k] / RECOVERY_THETA[k] - 1.0) for k in RECOVERED])
        gaps.append(res_b.loglik - res_a.loglik)
    secs = time.perf_counter() - t0
    med = np.median(np.array(errs), axis=0)
    ok = bool(np.all(med <= 0.25)) and min(gaps) >= -1e-3 and secs < 900
    detail = ", ".join(f"{k} {v:.3f}" for k, v in zip(RECOVERED, med))
    assert report(
        7, ok, f"median rel. error {detail} (<= 0.25); min loglik B - A {min(gaps):.2e}; {secs:.0f} s"
    )


# ------------------------------------------------------------------ 8

SIZE_SPEC = dict(n_starts=3, start_evals=1500, max_evals=3000, n_restarts=1)


def test_criterion_8_lr_size():
    p = params_from_theta(RECOVERY_THETA, xi=0.0, r=RECOVERY_R)
    slopes = efficient_slopes(p.r_eff, p.alpha_D, p.alpha_I)
    model = exact_discretize(p, PriceCoefficients(-2.0, *slopes), 1.0)
    spec = EstimationSpec(r=RECOVERY_R, xi=0.0, **SIZE_SPEC)
    rejects, stats = 0, []
    t0 = time.perf_counter()
    for seed in range(100):
        ys = simulate(model, T=300, seed=1000 + seed)
        res_a, res_b = estimate_nested(ys, spec)
        res = compare_reports(result_report(res_a, spec), result_report(res_b, spec))
        stats.append(res.statistic)
        rejects += res.statistic > res.thresholds[0.05]
    secs = time.perf_counter() - t0
    ok = rejects <= 15 and secs < 1800
    assert report(
        8, ok, f"rejected at 5% in {rejects}/100 TypeA datasets (<= 15); median LR {np.median(stats):.2f}; "
        f"{secs:.0f} s",
    )


# ------------------------------------------------------------------ 9


def test_criterion_9_pipeline_contracts():
    rng = np.random.default_rng(9)
    worst_mean = worst_trip = 0.0
    for k in range(50):
        n = int(rng.integers(20, 200))
        t = 1871.0 + np.arange(n)
        xi = rng.uniform(0.0, 0.03)
        P = np.exp(rng.normal(0.02, 0.15, n).cumsum()) * rng.uniform(1, 1000)
        D = P * rng.uniform(0.02, 0.06, n)
        raw = RawSeries(t, P, D, rng.uniform(5, 250, n) if k % 2 else None)
        obs = detrend_and_normalize(raw, xi)
        worst_mean = max(worst_mean, abs(obs.price.mean() - 1.0))
        p_back, d_back = restore_levels(obs)
        worst_trip = max(worst_trip, np.abs(p_back / raw.price - 1).max(), np.abs(d_back / raw.dividend - 1).max())
    ok = worst_mean <= 1e-12 and worst_trip <= 1e-10
    assert report("9a", ok, f"mean price - 1 {worst_mean:.1e} (<= 1e-12); round trip {worst_trip:.1e} (<= 1e-10)")


def _shiller_path():
    env = os.environ.get("NOISYREE_SHILLER_CSV")
    if env:
        return Path(env)
    here = Path(__file__).parent / "data" / "shiller.csv"
    return here if here.exists() else None


def test_criterion_9_shiller():
    path = _shiller_path()
    if path is None or not path.exists():
        report("9b", False, "Shiller dataset not available offline; set NOISYREE_SHILLER_CSV to run")
        pytest.xfail("public Shiller dataset is not available in this environment")
    raw = load_csv(path, date_style="shiller")
    if raw.periods_per_year > 1.5:
        raw = annual_sample(raw, 1)
    raw = RawSeries(raw.dates[raw.dates < 2010], raw.nominal_price[raw.dates < 2010],
                    raw.nominal_dividend[raw.dates < 2010],
                    None if raw.cpi is None else raw.cpi[raw.dates < 2010], raw.cpi_base, raw.meta)
    xi = estimate_growth_rate(raw)
    reg = cointegrating_ols(detrend_and_normalize(raw, xi), xi)
    ok = 0.0095 <= xi <= 0.0135 and 0.010 <= reg.slope <= 0.016 and 0.02 <= reg.implied_rate <= 0.03
    assert report(
        "9b", ok, f"xi {xi:.4f} in [0.0095, 0.0135]; slope {reg.slope:.4f} in [0.010, 0.016]; "
        f"implied r {reg.implied_rate:.4f}",
    )
