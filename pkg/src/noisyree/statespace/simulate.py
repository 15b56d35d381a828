"""Exact sampling of the discrete model."""

from __future__ import annotations

import numpy as np

from ..model import PriceCoefficients
from ..series import ObservationSeries
from .discretize import StateSpaceModel, measurement


def _psd_sqrt(S: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    return V * np.sqrt(np.clip(w, 0.0, None))


def simulate(
    model: StateSpaceModel,
    coeffs: PriceCoefficients | None = None,
    T: int = 100,
    seed: int = 0,
    return_states: bool = False,
):
    """Draw ``z_t = F z_{t-1} + e_t`` from ``z_0 = 0`` and map to observations.

    ``coeffs``, when given, overrides the model's measurement map. The
    result is deterministic in ``seed``.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if coeffs is not None:
        c, H = measurement(coeffs)
    else:
        c, H = model.measurement_intercept, model.H
    rng = np.random.default_rng(seed)
    n = model.F.shape[0]
    root = _psd_sqrt(model.Omega)
    shocks = rng.standard_normal((T, n)) @ root.T
    z = np.zeros((T, n))
    prev = np.zeros(n)
    for t in range(T):
        prev = model.F @ prev + shocks[t]
        z[t] = prev
    y = c + z @ H.T
    times = model.dt * np.arange(1, T + 1)
    series = ObservationSeries(times, y[:, 0], y[:, 1], {"source": "simulated", "seed": int(seed)})
    return (series, z) if return_states else series
