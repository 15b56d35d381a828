import numpy as np
import pytest

from noisyree.model import ModelParams, table_params


@pytest.fixture
def header_params() -> ModelParams:
    return table_params()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_params(rng, **over) -> ModelParams:
    """A valid economy with parameters spread over plausible ranges."""
    s0 = rng.uniform(0.05, 0.6)
    rho = rng.uniform(0.0, 2.0)
    r = rng.uniform(0.02, 0.1)
    vals = dict(
        r=r, xi=rng.uniform(0.0, 0.9 * r), beta=rng.uniform(0.05, 0.5), phi=rng.uniform(0.2, 2.0),
        alpha_D=rng.uniform(0.05, 2.0), alpha_I=rng.uniform(0.05, 2.0), alpha_Theta=rng.uniform(0.01, 2.0),
        sigma_0=s0, sigma_D=rng.uniform(0.01, 0.5), sigma_I=s0 * np.sqrt(2.0 * rho),
        sigma_Theta=rng.uniform(0.05, 1.5),
    )
    vals.update(over)
    return ModelParams(**vals)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
