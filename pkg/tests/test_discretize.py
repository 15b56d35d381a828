import numpy as np
import pytest

from noisyree.model import PriceCoefficients
from noisyree.statespace import continuous_system, exact_discretize, stationary_covariance, van_loan

from conftest import random_params
from oracles import omega_quad, series_expm

COEFFS = PriceCoefficients(-1.0, 20.0, 1.5, 10.0)


def test_examples(header_params):
    p = header_params.replace(alpha_I=1e-300)
    m = exact_discretize(p, COEFFS, 1.0)
    assert np.allclose(m.F[:2, :2], np.eye(2), atol=1e-15)
    p = header_params.replace(alpha_I=0.905)
    F = exact_discretize(p, COEFFS, 1.0).F
    assert F[0, 1] == pytest.approx(1 - np.exp(-0.905), abs=1e-12)
    assert F[1, 1] == pytest.approx(np.exp(-0.905), abs=1e-12)
    # exact values are 0.595458 and 0.404542; the quoted 0.59548 / 0.40452 carry a rounding slip
    assert F[0, 1] == pytest.approx(0.59548, abs=5e-5)
    assert F[1, 1] == pytest.approx(0.40452, abs=5e-5)
    p = header_params.replace(alpha_D=0.5, sigma_D=0.1)
    Om = exact_discretize(p, COEFFS, 1.0).Omega
    assert Om[2, 2] == pytest.approx(0.01 * (1 - np.exp(-1.0)) / 1.0, rel=1e-12)
    assert Om[2, 2] == pytest.approx(0.0063212, abs=1e-7)
    p = header_params.replace(alpha_Theta=1e-12)
    assert exact_discretize(p, COEFFS, 1.0).Omega[3, 3] == pytest.approx(p.sigma_Theta**2, rel=1e-9)


def test_rejects_bad_dt(header_params):
    for dt in (0.0, -1.0):
        with pytest.raises(ValueError):
            exact_discretize(header_params, COEFFS, dt)


def test_measurement_map(header_params):
    m = exact_discretize(header_params, COEFFS, 1.0)
    assert m.measurement_intercept.tolist() == [-1.0, 0.0]
    assert m.H.tolist() == [[20.0, 10.0, 1.5, 1.0], [1.0, 0.0, 1.0, 0.0]]


def test_omega_psd(rng):
    for _ in range(200):
        m = exact_discretize(random_params(rng), COEFFS, rng.uniform(0.05, 3.0))
        assert np.array_equal(m.Omega, m.Omega.T)
        assert np.linalg.eigvalsh(m.Omega).min() >= -1e-12


def test_against_quadrature_sample(rng):
    for _ in range(20):
        p = random_params(rng)
        dt = rng.uniform(0.1, 2.0)
        A, S = continuous_system(p)
        F, Om = van_loan(A, S, dt)
        assert np.abs(F - series_expm(A * dt)).max() <= 1e-10
        assert np.abs(Om - omega_quad(A, S, dt)).max() <= 1e-9


def test_stationary_covariance_fixed_point(header_params):
    m = exact_discretize(header_params, COEFFS, 1.0)
    idx = [1, 2, 3]
    F, Om = m.F[np.ix_(idx, idx)], m.Omega[np.ix_(idx, idx)]
    V = stationary_covariance(F, Om)
    W = np.zeros_like(V)
    for _ in range(5000):
        W = F @ W @ F.T + Om
    assert np.allclose(V, W, rtol=1e-10, atol=1e-12)
