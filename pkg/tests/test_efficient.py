import numpy as np
import pytest

from noisyree.efficient import (
    TYPE_A,
    TYPE_B,
    classify,
    efficient_coefficients,
    efficient_intercept,
    efficient_pI_product_form,
    efficient_slopes,
)
from noisyree.model import ParameterError, PriceCoefficients, table_params

from conftest import random_params


def test_header_slopes(header_params):
    c = efficient_coefficients(header_params)
    assert c.pD0 == pytest.approx(25.641, abs=1e-3)
    assert c.pD1 == pytest.approx(1.855, abs=1e-3)
    # exact value 18.4468; the printed 18.446 is truncated
    assert c.pI == pytest.approx(18.4468, abs=1e-4)
    assert c.pI == pytest.approx(18.446, abs=1e-3)


def test_slopes_limits():
    assert efficient_slopes(0.039, 1e12, 0.1)[1] == pytest.approx(0.0, abs=1e-11)
    assert efficient_slopes(0.039, 0.5, 0.0)[2] == 0.0


def test_phi_zero_intercept(header_params):
    p = header_params.replace(phi=1e-300)
    assert efficient_intercept(p) == pytest.approx(0.0, abs=1e-290)


def test_intercept_header_values():
    # with sigma_I = 0.4 the closed form gives the tabulated -91.773
    assert efficient_intercept(table_params()) == pytest.approx(-91.773, abs=1e-3)
    # with the rho_I = 2 listing it is about -20.3
    assert efficient_intercept(table_params(sigma_I=1.0)) == pytest.approx(-20.3, abs=0.05)


def test_rejects_r_below_xi():
    with pytest.raises(ParameterError):
        efficient_slopes(0.0, 0.5, 0.1)


def test_pI_identity_and_ordering(rng):
    for _ in range(500):
        p = random_params(rng)
        pD0, pD1, pI = efficient_slopes(p.r_eff, p.alpha_D, p.alpha_I)
        assert pI == pytest.approx(efficient_pI_product_form(p.r_eff, p.alpha_I), rel=1e-13, abs=1e-14)
        assert pD0 > pD1 > 0 and pI >= 0
        # the sign condition for p0 <= 0
        if p.rho_I <= (p.r_eff + p.alpha_I) ** 2 / (2 * p.r_eff * p.alpha_I):
            assert efficient_intercept(p) <= 0


def test_classify(header_params, rng):
    eff = efficient_coefficients(header_params)
    cls = classify(eff, header_params, 1e-12)
    assert cls.tag == TYPE_A and cls.max_coeff_deviation == 0.0
    tol = 1e-4
    off = PriceCoefficients(eff.p0, eff.pD0, eff.pD1, eff.pI + 10 * tol)
    cls = classify(off, header_params, tol)
    assert cls.tag == TYPE_B and cls.max_coeff_deviation == pytest.approx(10 * tol)
    table2 = PriceCoefficients(-2664.632, -89.311, 1.855, -13.384)
    assert classify(table2, header_params.replace(phi=1.0)).tag == TYPE_B
    for _ in range(50):
        p = random_params(rng)
        assert classify(efficient_coefficients(p), p, 1e-9).tag == TYPE_A
    with pytest.raises(ValueError):
        classify(eff, header_params, 0.0)


def test_classify_intercept_option(header_params):
    eff = efficient_coefficients(header_params)
    shifted = PriceCoefficients(eff.p0 + 1.0, eff.pD0, eff.pD1, eff.pI)
    assert classify(shifted, header_params).tag == TYPE_A
    assert classify(shifted, header_params, include_intercept=True).tag == TYPE_B
