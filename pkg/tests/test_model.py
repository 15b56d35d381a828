import math

import numpy as np
import pytest

from noisyree.efficient import efficient_coefficients
from noisyree.model import (
    ModelParams,
    ParameterError,
    PriceCoefficients,
    build_system_matrices,
    instantaneous_price_variance,
    return_loadings,
    rho_from_sigmas,
    state_vector,
    table_params,
)

from conftest import random_params


def test_rho_from_sigmas_examples():
    assert rho_from_sigmas(1.0, 0.5) == pytest.approx(2.0)
    assert rho_from_sigmas(0.0, 0.5) == 0.0
    assert rho_from_sigmas(0.4, 0.5) == pytest.approx(0.32)


@pytest.mark.parametrize("sI, s0", [(1.0, 0.0), (1.1, 0.5)])
def test_rho_from_sigmas_rejects(sI, s0):
    with pytest.raises(ParameterError):
        rho_from_sigmas(sI, s0)


def test_params_invariants():
    good = table_params().to_dict()
    for bad in (dict(r=0.011), dict(alpha_D=0.0), dict(alpha_I=-1.0), dict(alpha_Theta=-0.1),
                dict(phi=0.0), dict(sigma_D=-0.1), dict(sigma_I=1.2), dict(r=math.nan)):
        with pytest.raises(ParameterError):
            ModelParams(**{**good, **bad})
    # rho = 2 is allowed
    ModelParams(**{**good, "sigma_I": 1.0})


def test_state_vector_leading_one():
    z = state_vector(1.0, 2.0, 3.0, 4.0)
    assert z[0] == 1.0 and z.tolist() == [1.0, 1.0, 2.0, 3.0, 4.0]


def test_system_matrices_pattern(header_params):
    sm = build_system_matrices(header_params)
    p = header_params
    A = np.zeros((5, 5))
    A[1, 3], A[2, 2], A[3, 3], A[4, 4] = p.alpha_I, -p.alpha_D, -p.alpha_I, -p.alpha_Theta
    assert np.array_equal(sm.A, A)
    assert np.all(sm.Bhalf[0] == 0)
    assert sm.Bhalf[3, 0] == pytest.approx(-0.16)
    assert sm.Bhalf[3, 2] == pytest.approx(math.sqrt(0.5376) * 0.5, abs=1e-12)
    assert sm.Bhalf[3, 2] == pytest.approx(0.366606, abs=1e-6)


def test_system_matrices_rho_two_boundary():
    sm = build_system_matrices(table_params(sigma_I=1.0))
    assert sm.Bhalf[3].tolist() == [-1.0, 0.0, 0.0, 0.0]


def test_degenerate_economy_zero_matrices():
    p = ModelParams.unchecked(r=0.05, xi=0.0, beta=0.3, phi=1.0, alpha_D=0.0, alpha_I=0.0, alpha_Theta=0.0,
                              sigma_0=0.0, sigma_D=0.0, sigma_I=0.0, sigma_Theta=0.0)
    sm = build_system_matrices(p)
    assert not sm.A.any() and not sm.Bhalf.any()


def test_return_loadings_zero_coeffs(header_params):
    rl = return_loadings(header_params, PriceCoefficients(0, 0, 0, 0))
    assert np.allclose(rl.S, [0, 1, 1, 0, -0.089], atol=1e-15)
    assert np.allclose(rl.Thalf, [0, 0, 0, 0.5])
    assert rl.T == pytest.approx(0.25)


def test_return_loadings_efficient_zero_rows(rng):
    for _ in range(50):
        p = random_params(rng)
        rl = return_loadings(p, efficient_coefficients(p))
        assert np.abs(rl.S[1:4]).max() <= 1e-10 * max(1.0, 1.0 / p.r_eff)


def test_price_variance_examples(header_params):
    zero = header_params.replace(sigma_0=0.0, sigma_D=0.0, sigma_I=0.0, sigma_Theta=0.0)
    assert instantaneous_price_variance(zero, efficient_coefficients(header_params)) == 0.0
    one = header_params.replace(sigma_Theta=1.0)
    assert instantaneous_price_variance(one, PriceCoefficients(0, 0, 0, 0)) == pytest.approx(1.0)


def test_variance_homogeneity(rng):
    p = random_params(rng)
    c = PriceCoefficients(-1.0, 10.0, 2.0, 3.0)
    k = 1.7
    q = p.replace(sigma_0=k * p.sigma_0, sigma_D=k * p.sigma_D, sigma_I=k * p.sigma_I, sigma_Theta=k * p.sigma_Theta)
    a, b = return_loadings(p, c), return_loadings(q, c)
    assert np.allclose(b.S, a.S)
    assert np.allclose(b.Thalf, k * a.Thalf)
    assert b.T == pytest.approx(k * k * a.T)


def test_bbt_psd_and_deterministic(rng):
    for _ in range(100):
        p = random_params(rng)
        B = build_system_matrices(p).B
        assert np.allclose(B, B.T)
        assert np.linalg.eigvalsh(B).min() >= -1e-14
    p = random_params(rng)
    a, b = build_system_matrices(p), build_system_matrices(p)
    assert np.array_equal(a.A, b.A) and np.array_equal(a.Bhalf, b.Bhalf)


def test_price_variance_monte_carlo(header_params):
    # variance of dP over a short step, from the exact simulator
    from noisyree.statespace import exact_discretize, simulate

    c = efficient_coefficients(header_params)
    dt = 1e-3
    m = exact_discretize(header_params, c, dt)
    s = simulate(m, T=20000, seed=7)
    dP = np.diff(s.price)
    est = dP.var() / dt
    assert est == pytest.approx(instantaneous_price_variance(header_params, c), rel=0.05)
