"""Price/dividend ingestion, de-trending, growth rate and cointegrating OLS."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np

from .series import ObservationSeries

DEFAULT_COLUMNS = {"date": "date", "price": "price", "dividend": "dividend", "cpi": "cpi"}


class DataError(ValueError):
    """Malformed or inadmissible input data."""


@dataclass(frozen=True)
class RawSeries:
    """Undeflated observations; ``dates`` are decimal years."""

    dates: np.ndarray
    nominal_price: np.ndarray
    nominal_dividend: np.ndarray
    cpi: np.ndarray | None = None
    cpi_base: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        d = np.asarray(self.dates, dtype=float)
        p = np.asarray(self.nominal_price, dtype=float)
        v = np.asarray(self.nominal_dividend, dtype=float)
        if not len(d) == len(p) == len(v):
            raise DataError("columns differ in length")
        if len(d) > 1 and np.any(np.diff(d) <= 0):
            raise DataError("dates must be strictly increasing")
        if np.any(p <= 0) or np.any(v <= 0):
            raise DataError("prices and dividends must be positive")
        object.__setattr__(self, "dates", d)
        object.__setattr__(self, "nominal_price", p)
        object.__setattr__(self, "nominal_dividend", v)
        if self.cpi is not None:
            c = np.asarray(self.cpi, dtype=float)
            if len(c) != len(d) or np.any(c <= 0):
                raise DataError("cpi must be positive and match the other columns")
            object.__setattr__(self, "cpi", c)

    def __len__(self) -> int:
        return len(self.dates)

    def _deflator(self) -> np.ndarray:
        if self.cpi is None:
            return np.ones(len(self))
        base = self.cpi[-1] if self.cpi_base is None else self.cpi_base
        return base / self.cpi

    @property
    def price(self) -> np.ndarray:
        """Real price, ``nominal * CPI_base / CPI_t`` when a CPI is present."""
        return self.nominal_price * self._deflator()

    @property
    def dividend(self) -> np.ndarray:
        return self.nominal_dividend * self._deflator()

    @property
    def periods_per_year(self) -> float:
        if len(self) < 2:
            raise DataError("need at least two observations")
        return 1.0 / float(np.median(np.diff(self.dates)))


_ISO = re.compile(r"^(\d{4})-(\d{1,2})(?:-(\d{1,2}))?$")


def parse_date(text: str, style: str = "auto") -> float:
    """Decimal year from ISO-8601 (``YYYY-MM[-DD]``), a decimal year, or ``YYYY.MM``.

    ``style="shiller"`` reads ``1871.01`` as January 1871 and ``1871.1``
    as October, the convention of the Shiller spreadsheet.
    """
    s = text.strip()
    m = _ISO.match(s)
    if m:
        y, mo, dd = int(m.group(1)), int(m.group(2)), int(m.group(3) or 1)
        start = date(y, 1, 1).toordinal()
        length = date(y + 1, 1, 1).toordinal() - start
        return y + (date(y, mo, dd).toordinal() - start) / length
    if style == "shiller":
        y, _, frac = s.partition(".")
        mo = int((frac + "0")[:2]) if frac else 1
        if not 1 <= mo <= 12:
            raise ValueError(f"bad month in {text!r}")
        return int(y) + (mo - 1) / 12.0
    return float(s)


def load_csv(
    path,
    columns: dict | None = None,
    date_style: str = "auto",
    deflate: bool = True,
    cpi_base: float | None = None,
) -> RawSeries:
    """Read a price/dividend CSV with a header row.

    ``columns`` maps the logical names ``date, price, dividend, cpi`` to
    header names. A missing ``cpi`` column is allowed; any other missing
    column is fatal. Rows are checked for parse errors and positivity and
    reported with their line number. ``cpi_base`` defaults to the last CPI.
    """
    cols = dict(DEFAULT_COLUMNS, **(columns or {}))
    path = Path(path)
    raw = path.read_bytes()
    text = raw.decode("utf-8-sig")
    reader = csv.DictReader(text.splitlines())
    header = reader.fieldnames or []
    for key in ("date", "price", "dividend"):
        if cols[key] not in header:
            raise DataError(f"{path}: missing column {cols[key]!r} (have {header})")
    has_cpi = deflate and cols["cpi"] in header

    dates, prices, divs, cpis = [], [], [], []
    errors = []
    for lineno, row in enumerate(reader, start=2):
        try:
            d = parse_date(row[cols["date"]], date_style)
            p = float(row[cols["price"]])
            v = float(row[cols["dividend"]])
            c = float(row[cols["cpi"]]) if has_cpi else 1.0
        except (TypeError, ValueError) as exc:
            errors.append(f"line {lineno}: {exc}")
            continue
        if not (math.isfinite(p) and p > 0):
            errors.append(f"line {lineno}: non-positive price {p}")
        if not (math.isfinite(v) and v > 0):
            errors.append(f"line {lineno}: non-positive dividend {v}")
        if has_cpi and not (math.isfinite(c) and c > 0):
            errors.append(f"line {lineno}: non-positive cpi {c}")
        if dates and d <= dates[-1]:
            errors.append(f"line {lineno}: date {row[cols['date']]} not after previous row")
        dates.append(d)
        prices.append(p)
        divs.append(v)
        cpis.append(c)
    if errors:
        raise DataError(f"{path}: " + "; ".join(errors))
    if not dates:
        raise DataError(f"{path}: no data rows")
    meta = {"source": str(path), "sha256": hashlib.sha256(raw).hexdigest()}
    return RawSeries(
        np.array(dates), np.array(prices), np.array(divs),
        np.array(cpis) if has_cpi else None, cpi_base, meta,
    )


def annual_sample(series: RawSeries, month: int = 1) -> RawSeries:
    """Keep one observation per year, the one falling in ``month``."""
    years = np.floor(series.dates + 1e-9)
    mo = np.rint((series.dates - years) * 12.0).astype(int) + 1
    keep = mo == month
    if not keep.any():
        raise DataError(f"no observations in month {month}")
    cpi = series.cpi[keep] if series.cpi is not None else None
    base = series.cpi_base
    if series.cpi is not None and base is None:
        base = float(series.cpi[-1])  # keep the deflation base of the full sample
    return RawSeries(
        series.dates[keep], series.nominal_price[keep], series.nominal_dividend[keep],
        cpi, base, dict(series.meta, annual_month=month),
    )


def estimate_growth_rate(series: RawSeries, method: str = "log") -> float:
    """Average per-period dividend growth, annualized by the sampling rate."""
    d = series.dividend
    if len(d) < 2:
        raise DataError("need at least two periods")
    if np.any(d <= 0):
        raise DataError("dividends must be positive")
    if method == "log":
        g = float(np.mean(np.diff(np.log(d))))
    elif method == "arithmetic":
        g = float(np.mean(d[1:] / d[:-1] - 1.0))
    else:
        raise ValueError("method must be 'log' or 'arithmetic'")
    return g * series.periods_per_year


def detrend_and_normalize(series: RawSeries, xi: float) -> ObservationSeries:
    """Remove ``exp(xi t)`` and scale both series so the mean price is one.

    ``t`` is measured in years from the first observation.
    """
    t = series.dates - series.dates[0]
    trend = np.exp(-xi * t)
    P = series.price * trend
    D = series.dividend * trend
    scale = float(np.mean(P))
    meta = dict(series.meta, xi=float(xi), normalization=scale, time_origin=float(series.dates[0]))
    return ObservationSeries(t, P / scale, D / scale, meta)


def restore_levels(obs: ObservationSeries) -> tuple[np.ndarray, np.ndarray]:
    """Invert :func:`detrend_and_normalize` using the stored metadata."""
    k = obs.meta["normalization"] * np.exp(obs.meta["xi"] * obs.times)
    return obs.price * k, obs.dividend * k


def write_observations(obs: ObservationSeries, csv_path) -> Path:
    """Write the series CSV plus a ``.meta.json`` sidecar; returns the sidecar path."""
    csv_path = Path(csv_path)
    csv_path.write_text(obs.to_csv(), encoding="utf-8", newline="\n")
    side = csv_path.with_suffix(".meta.json")
    side.write_text(json.dumps(obs.meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return side


def read_observations(csv_path) -> ObservationSeries:
    csv_path = Path(csv_path)
    side = csv_path.with_suffix(".meta.json")
    meta = json.loads(side.read_text(encoding="utf-8")) if side.exists() else {}
    return ObservationSeries.from_csv(csv_path, meta)


@dataclass(frozen=True)
class RegressionReport:
    slope: float
    intercept: float
    robust_se_slope: float
    robust_se_intercept: float
    t_slope: float
    t_intercept: float
    n: int
    r_squared: float
    implied_rate: float
    direction: str
    max_abs_residual: float


def cointegrating_ols(
    series: ObservationSeries, xi: float, direction: str = "D_on_P", with_intercept: bool = True
) -> RegressionReport:
    """OLS of dividend on price (or the reverse) with HC1 standard errors.

    Since ``D = gamma + (r - xi) P`` along the efficient price, the implied
    rate is ``slope + xi`` for ``D_on_P`` and ``1 / slope + xi`` for ``P_on_D``.
    Without an intercept the intercept fields are ``nan``.
    """
    import statsmodels.api as sm

    if direction == "D_on_P":
        y, x = series.dividend, series.price
    elif direction == "P_on_D":
        y, x = series.price, series.dividend
    else:
        raise ValueError("direction must be 'D_on_P' or 'P_on_D'")
    n = len(y)
    if n < 3:
        raise DataError("need at least three observations")
    if with_intercept and np.ptp(x) == 0.0:
        raise DataError("regressor has zero variance")
    if not with_intercept and not np.any(x):
        raise DataError("regressor is identically zero")

    X = sm.add_constant(x, has_constant="add") if with_intercept else x[:, None]
    fit = sm.OLS(y, X).fit(cov_type="HC1")
    params = np.asarray(fit.params)
    se = np.asarray(fit.bse)
    k = 1 if with_intercept else 0
    slope = float(params[k])
    slope_se = float(se[k])
    resid = np.asarray(fit.resid)
    if with_intercept:
        icpt, icpt_se = float(params[0]), float(se[0])
        r2 = float(fit.rsquared)
    else:
        icpt = icpt_se = math.nan
        # uncentered, the convention for a regression through the origin
        r2 = float(1.0 - resid @ resid / (y @ y))

    def _t(b, s):
        if s > 0:
            return b / s
        return math.copysign(math.inf, b) if b else math.nan

    rate = slope + xi if direction == "D_on_P" else 1.0 / slope + xi
    return RegressionReport(
        slope=slope, intercept=icpt, robust_se_slope=slope_se, robust_se_intercept=icpt_se,
        t_slope=_t(slope, slope_se), t_intercept=_t(icpt, icpt_se), n=n, r_squared=r2,
        implied_rate=rate, direction=direction, max_abs_residual=float(np.abs(resid).max()),
    )
