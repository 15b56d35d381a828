"""Observation series shared by the data pipeline and the estimator."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ObservationSeries:
    """Equally spaced de-trended price and dividend observations.

    ``meta`` carries provenance: source file, ``xi`` used and the
    normalization constant.
    """

    times: np.ndarray
    price: np.ndarray
    dividend: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.price, dtype=float)
        d = np.asarray(self.dividend, dtype=float)
        if not (t.ndim == p.ndim == d.ndim == 1) or not (len(t) == len(p) == len(d)):
            raise ValueError("times, price and dividend must be 1-d and of equal length")
        if len(t) == 0:
            raise ValueError("series is empty")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(p)) and np.all(np.isfinite(d))):
            raise ValueError("series contains missing or non-finite values")
        if len(t) > 1:
            step = np.diff(t)
            if np.any(step <= 0):
                raise ValueError("times must be strictly increasing")
            if not np.allclose(step, step[0], rtol=1e-6, atol=1e-9):
                raise ValueError("times must be equally spaced")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "price", p)
        object.__setattr__(self, "dividend", d)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self) > 1 else 1.0

    def observations(self) -> np.ndarray:
        """``(n, 2)`` array with columns ``(price, dividend)``."""
        return np.column_stack([self.price, self.dividend])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "price", "dividend"])
        for row in zip(self.times, self.price, self.dividend):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path, meta: dict | None = None) -> "ObservationSeries":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: no data rows")
        try:
            t = [float(r["time"]) for r in rows]
            p = [float(r["price"]) for r in rows]
            d = [float(r["dividend"]) for r in rows]
        except KeyError as exc:
            raise ValueError(f"{path}: missing column {exc}") from None
        return cls(np.array(t), np.array(p), np.array(d), dict(meta or {}, source=str(path)))
