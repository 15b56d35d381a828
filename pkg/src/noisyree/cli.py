"""Command-line front end: ``noisyree {solve,sweep,simulate,ingest,estimate,compare}``.

Every run writes into one output directory: the effective configuration
(``config.ini``, re-runnable as is), the CSV/JSON results and a plain-text
``summary.txt``. Exit codes are 0 on success, 1 on usage or configuration
errors and 2 when a command produces an empty result.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
import time
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import marketdata
from .efficient import efficient_coefficients
from .model import ModelParams, ParameterError, PriceCoefficients, table_params
from .solver import SolverConfig, candidates_to_csv, candidates_to_json, solve_candidates, sweep, sweep_to_csv
from .series import ObservationSeries
from .statespace import (
    MODE_A,
    MODE_B,
    THETA_NAMES,
    EstimationSpec,
    estimate_ml,
    estimate_nested,
    exact_discretize,
    lr_test,
    simulate,
)

log = logging.getLogger("noisyree")

EXIT_OK, EXIT_CONFIG, EXIT_EMPTY = 0, 1, 2


class ConfigError(ValueError):
    """Invalid command line or configuration file."""


# ---------------------------------------------------------------- config

_MODEL_KEYS = tuple(f.name for f in fields(ModelParams))
_SOLVER_KEYS = (
    "n_starts", "coeff_range", "L_range", "coeff_scale", "newton_max_iter",
    "residual_tol", "dedupe_tol", "max_halvings", "class_tol", "closed_form_start",
    "impose_noise_clearing",
)
_ESTIMATION_KEYS = (
    "mode", "rate", "xi", "max_evals", "n_restarts", "prior", "include_constant",
) + tuple(f"init_{n}" for n in THETA_NAMES)
_SECTIONS = {
    "run": ("seed",),
    "model": _MODEL_KEYS,
    "solver": _SOLVER_KEYS,
    "sweep": ("phi", "sigma_Theta"),
    "simulate": ("T", "dt", "p0", "pD0", "pD1", "pI"),
    "ingest": (
        "input", "date", "price", "dividend", "cpi", "date_style", "deflate",
        "cpi_base", "annual_month", "growth", "xi", "direction", "with_intercept",
    ),
    "estimation": _ESTIMATION_KEYS,
    "compare": ("report_a", "report_b", "dof"),
    "io": ("data",),
}


@dataclass
class RunConfig:
    """Flat ``key = value`` sections; see ``_SECTIONS`` for the admitted keys."""

    sections: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str  # keys are case sensitive (sigma_Theta)
        try:
            cp.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        cfg = cls({s: dict(cp[s]) for s in cp.sections()})
        cfg.validate()
        return cfg

    def validate(self) -> None:
        for sec, items in self.sections.items():
            if sec not in _SECTIONS:
                raise ConfigError(f"unknown section [{sec}]")
            bad = sorted(set(items) - set(_SECTIONS[sec]))
            if bad:
                raise ConfigError(f"unknown key(s) in [{sec}]: {', '.join(bad)}")

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def set(self, section: str, key: str, value) -> None:
        self.sections.setdefault(section, {})[key] = str(value)

    def to_ini(self) -> str:
        lines = []
        for sec in _SECTIONS:
            items = self.sections.get(sec)
            if not items:
                continue
            lines.append(f"[{sec}]")
            lines += [f"{k} = {items[k]}" for k in _SECTIONS[sec] if k in items]
            lines.append("")
        return "\n".join(lines)


def _num(cfg: RunConfig, section: str, key: str, default, kind=float):
    raw = cfg.get(section, key)
    if raw is None:
        return default
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None


def _interval(text: str, what: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{what}: expected two numbers, got {text!r}") from None
    return lo, hi


def parse_grid(text: str) -> list[float]:
    """``a:b:n`` gives ``n`` points from ``a`` to ``b``; a bare number is a 1-point grid."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        if len(parts) == 3:
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
            if n < 1:
                raise ValueError
            return [a] if n == 1 else [float(v) for v in np.linspace(a, b, n)]
    except ValueError:
        pass
    raise ConfigError(f"bad grid {text!r}; expected a:b:n")


def parse_rate(text: str) -> tuple[str, float | None]:
    if text == "free":
        return "free", None
    if text.startswith("fixed:"):
        try:
            return "fixed", float(text.split(":", 1)[1])
        except ValueError:
            pass
    raise ConfigError(f"bad rate {text!r}; expected fixed:X or free")


def model_params(cfg: RunConfig) -> ModelParams:
    base = table_params().to_dict()
    for k in _MODEL_KEYS:
        base[k] = _num(cfg, "model", k, base[k])
    try:
        return ModelParams(**base)
    except ParameterError as exc:
        raise ConfigError(f"[model] {exc}") from None


def solver_config(cfg: RunConfig, seed: int) -> SolverConfig:
    d = SolverConfig()
    kw = dict(
        n_starts=_num(cfg, "solver", "n_starts", d.n_starts, int),
        coeff_scale=_num(cfg, "solver", "coeff_scale", d.coeff_scale),
        newton_max_iter=_num(cfg, "solver", "newton_max_iter", d.newton_max_iter, int),
        residual_tol=_num(cfg, "solver", "residual_tol", d.residual_tol),
        dedupe_tol=_num(cfg, "solver", "dedupe_tol", d.dedupe_tol),
        max_halvings=_num(cfg, "solver", "max_halvings", d.max_halvings, int),
        class_tol=_num(cfg, "solver", "class_tol", d.class_tol),
        closed_form_start=_num(cfg, "solver", "closed_form_start", d.closed_form_start, bool),
        impose_noise_clearing=_num(cfg, "solver", "impose_noise_clearing", d.impose_noise_clearing, bool),
        rng_seed=seed,
    )
    for key in ("coeff_range", "L_range"):
        raw = cfg.get("solver", key)
        kw[key] = getattr(d, key) if raw is None else _interval(raw, f"[solver] {key}")
    try:
        return SolverConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"[solver] {exc}") from None


def estimation_spec(cfg: RunConfig, mode: str, seed: int, xi_default: float = 0.0) -> EstimationSpec:
    rate_mode, r = parse_rate(cfg.get("estimation", "rate", "fixed:0.05"))
    xi = _num(cfg, "estimation", "xi", xi_default)
    theta = {n: _num(cfg, "estimation", f"init_{n}", None) for n in THETA_NAMES}
    theta = {k: v for k, v in theta.items() if v is not None}
    if r is None:
        r = max(0.05, xi + 0.02)  # starting value only in free mode
    try:
        return EstimationSpec(
            mode=mode, rate_mode=rate_mode, r=r, xi=xi, theta_init=theta,
            max_evals=_num(cfg, "estimation", "max_evals", 4000, int),
            n_restarts=_num(cfg, "estimation", "n_restarts", 3, int),
            prior=cfg.get("estimation", "prior", "mixed"),
            include_constant=_num(cfg, "estimation", "include_constant", True, bool),
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(f"[estimation] {exc}") from None


# ---------------------------------------------------------------- output


class RunDir:
    def __init__(self, path: Path, reproducible: bool):
        self.path = path
        self.reproducible = reproducible
        path.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> Path:
        p = self.path / name
        p.write_text(text, encoding="utf-8", newline="\n")
        return p

    def summary(self, command: str, lines: list[str]) -> None:
        head = [f"noisyree {command}"]
        if not self.reproducible:
            head.append(time.strftime("run at %Y-%m-%dT%H:%M:%S%z"))
        self.write("summary.txt", "\n".join(head + [""] + lines) + "\n")


def _emit(lines: list[str]) -> None:
    for ln in lines:
        print(ln)


def candidate_table(cands) -> list[str]:
    rows = [f"{'Candidate Equilibrium Price':<28}{'Utility':>10}{'p0':>12}{'pD0':>10}{'pD1':>10}{'pI':>10}"]
    for c in cands:
        k = c.coeffs
        label = "Equilibrium-Type " + c.eq_class.tag[-1]
        rows.append(
            f"{label:<28}{c.essential_utility:>10.3f}{k.p0:>12.3f}{k.pD0:>10.3f}{k.pD1:>10.3f}{k.pI:>10.3f}"
        )
    return rows


# ---------------------------------------------------------------- commands


def cmd_solve(cfg: RunConfig, seed: int, out: RunDir) -> int:
    params = model_params(cfg)
    cands = solve_candidates(params, solver_config(cfg, seed))
    out.write("candidates.csv", candidates_to_csv(cands))
    out.write("candidates.json", candidates_to_json(params, cands) + "\n")
    if not cands:
        out.summary("solve", ["no candidates"])
        print("no candidates", file=sys.stderr)
        return EXIT_EMPTY
    lines = candidate_table(cands)
    if any(c.p0_indeterminate for c in cands):
        lines.append("note: some candidates lie on a family of roots with free p0 (p0_indeterminate)")
    out.summary("solve", lines)
    _emit(lines)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, seed: int, out: RunDir) -> int:
    params = model_params(cfg)
    phis = parse_grid(cfg.get("sweep", "phi", str(params.phi)))
    sigmas = parse_grid(cfg.get("sweep", "sigma_Theta", str(params.sigma_Theta)))
    records = sweep(params, phis, sigmas, solver_config(cfg, seed))
    out.write("sweep.csv", sweep_to_csv(records))
    lines = [f"{'phi':>8}{'sigma_Theta':>13}{'TypeA':>10}{'TypeB':>10}  dominant"]
    for r in records:
        ua = "-" if r.best_typeA_utility is None else f"{r.best_typeA_utility:.3f}"
        ub = "-" if r.best_typeB_utility is None else f"{r.best_typeB_utility:.3f}"
        lines.append(f"{r.phi:>8.3f}{r.sigma_Theta:>13.3f}{ua:>10}{ub:>10}  {r.dominant}{'  ' + r.error if r.error else ''}")
    out.summary("sweep", lines)
    _emit(lines)
    return EXIT_OK if any(r.n_candidates for r in records) else EXIT_EMPTY


def cmd_simulate(cfg: RunConfig, seed: int, out: RunDir) -> int:
    params = model_params(cfg)
    eff = efficient_coefficients(params)
    coeffs = PriceCoefficients(*(
        _num(cfg, "simulate", k, getattr(eff, k)) for k in ("p0", "pD0", "pD1", "pI")
    ))
    T = _num(cfg, "simulate", "T", 300, int)
    dt = _num(cfg, "simulate", "dt", 1.0)
    if T < 1 or not dt > 0:
        raise ConfigError("[simulate] need T >= 1 and dt > 0")
    series = simulate(exact_discretize(params, coeffs, dt), T=T, seed=seed)
    series.meta.update(xi=0.0, normalization=1.0, coeffs=list(coeffs.as_array()))
    marketdata.write_observations(series, out.path / "series.csv")
    lines = [f"simulated {T} observations, dt = {dt:g}, seed = {seed}",
             "coefficients (p0, pD0, pD1, pI) = " + ", ".join(f"{v:.6g}" for v in coeffs.as_array())]
    out.summary("simulate", lines)
    _emit(lines)
    return EXIT_OK


def cmd_ingest(cfg: RunConfig, seed: int, out: RunDir) -> int:
    src = cfg.get("ingest", "input")
    if src is None:
        raise ConfigError("[ingest] input is required")
    if not Path(src).is_file():
        raise ConfigError(f"[ingest] input not found: {src}")
    cols = {k: cfg.get("ingest", k) for k in ("date", "price", "dividend", "cpi") if cfg.get("ingest", k)}
    raw = marketdata.load_csv(
        src, cols, date_style=cfg.get("ingest", "date_style", "auto"),
        deflate=_num(cfg, "ingest", "deflate", True, bool),
        cpi_base=_num(cfg, "ingest", "cpi_base", None),
    )
    month = _num(cfg, "ingest", "annual_month", None, int)
    if month is not None:
        raw = marketdata.annual_sample(raw, month)
    growth = cfg.get("ingest", "growth", "log")
    xi = _num(cfg, "ingest", "xi", None)
    if xi is None:
        xi = marketdata.estimate_growth_rate(raw, growth)
    obs = marketdata.detrend_and_normalize(raw, xi)
    marketdata.write_observations(obs, out.path / "observations.csv")
    reg = marketdata.cointegrating_ols(
        obs, xi, cfg.get("ingest", "direction", "D_on_P"),
        _num(cfg, "ingest", "with_intercept", True, bool),
    )
    out.write("regression.json", json.dumps(reg.__dict__, indent=2, default=float) + "\n")
    lines = [
        f"{len(obs)} observations from {src}",
        f"xi = {xi:.6f} ({growth} growth)",
        f"normalization constant = {obs.meta['normalization']:.6g}",
        f"{reg.direction}: slope {reg.slope:.6f} (robust se {reg.robust_se_slope:.6f}), "
        f"intercept {reg.intercept:.6f} (robust se {reg.robust_se_intercept:.6f}), n = {reg.n}",
        f"implied rate = {reg.implied_rate:.4f}",
    ]
    out.summary("ingest", lines)
    _emit(lines)
    return EXIT_OK


def _load_series(cfg: RunConfig) -> ObservationSeries:
    data = cfg.get("io", "data")
    if data is None:
        raise ConfigError("[io] data is required")
    if not Path(data).is_file():
        raise ConfigError(f"[io] data not found: {data}")
    try:
        return marketdata.read_observations(data)
    except ValueError as exc:
        raise ConfigError(f"{data}: {exc}") from None


def result_report(res, spec: EstimationSpec) -> dict:
    return {
        "mode": res.mode,
        "loglik": res.loglik,
        "converged": res.converged,
        "n_evals": res.n_evals,
        "theta": res.theta_hat,
        "coefficients": dict(zip(("p0", "pD0", "pD1", "pI"), map(float, res.coeffs_hat.as_array()))),
        "rate_mode": spec.rate_mode,
        "r": res.theta_hat.get("r", spec.r),
        "xi": spec.xi,
        "n_params": len(res.names),
    }


def estimates_csv(reports: dict) -> str:
    """Long-format table ``mode,parameter,value``; loglik and convergence close each mode."""
    rows = ["mode,parameter,value"]
    for mode, rep in reports.items():
        items = list(rep["theta"].items()) + list(rep["coefficients"].items())
        items.append(("loglik", rep["loglik"]))
        rows += [f"{mode},{k},{float(v)!r}" for k, v in items]
        rows.append(f"{mode},converged,{int(rep['converged'])}")
    return "\n".join(rows) + "\n"


def cmd_estimate(cfg: RunConfig, seed: int, out: RunDir) -> int:
    series = _load_series(cfg)
    mode = cfg.get("estimation", "mode", "both")
    if mode not in (MODE_A, MODE_B, "both"):
        raise ConfigError(f"[estimation] mode must be typeA, typeB or both, got {mode!r}")
    spec = estimation_spec(cfg, MODE_B if mode == "both" else mode, seed, series.meta.get("xi", 0.0))
    if mode == "both":
        results = estimate_nested(series, spec)
    else:
        results = (estimate_ml(series, spec, keep_states=False),)
    lines = []
    reports = {}
    for res in results:
        if not res.converged:
            warnings.warn(f"{res.mode}: optimizer did not converge within the evaluation budget")
        rep = result_report(res, spec)
        reports[res.mode] = rep
        out.write(f"report_{res.mode}.json", json.dumps(rep, indent=2, sort_keys=True) + "\n")
        lines.append(f"{res.mode}: loglik {res.loglik:.4f}, converged {res.converged}, evals {res.n_evals}")
        lines.append("  " + ", ".join(f"{k} {v:.4g}" for k, v in rep["theta"].items()))
        lines.append("  " + ", ".join(f"{k} {v:.4g}" for k, v in rep["coefficients"].items()))
    out.write("estimates.csv", estimates_csv(reports))
    if len(reports) == 2:
        lines += compare_lines(compare_reports(reports[MODE_A], reports[MODE_B]))
    out.summary("estimate", lines)
    _emit(lines)
    return EXIT_OK


def compare_reports(rep_a: dict, rep_b: dict, dof: int | None = None):
    """LR test of the restricted report against the free one."""
    if dof is None:
        dof = int(rep_b.get("n_params", 0) - rep_a.get("n_params", 0)) or 3
    return lr_test(float(rep_a["loglik"]), float(rep_b["loglik"]), dof)


def compare_lines(res) -> list[str]:
    crit = ", ".join(f"{a * 100:g}%: {v:.2f}" for a, v in res.thresholds.items())
    return [f"LR statistic {res.statistic:.2f} (dof {res.dof}; critical {crit})", f"verdict: {res.decision}"]


def cmd_compare(cfg: RunConfig, seed: int, out: RunDir) -> int:
    reps = []
    for key in ("report_a", "report_b"):
        p = cfg.get("compare", key)
        if p is None:
            raise ConfigError(f"[compare] {key} is required")
        try:
            reps.append(json.loads(Path(p).read_text(encoding="utf-8")))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"[compare] {key}: {exc}") from None
    dof = _num(cfg, "compare", "dof", None, int)
    res = compare_reports(reps[0], reps[1], dof)
    out.write("compare.json", json.dumps({
        "statistic": res.statistic, "dof": res.dof, "decision": res.decision,
        "thresholds": {str(k): v for k, v in res.thresholds.items()},
    }, indent=2) + "\n")
    lines = compare_lines(res)
    out.summary("compare", lines)
    _emit(lines)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve, "sweep": cmd_sweep, "simulate": cmd_simulate,
    "ingest": cmd_ingest, "estimate": cmd_estimate, "compare": cmd_compare,
}


# ---------------------------------------------------------------- entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="noisyree", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("reports", nargs="*", help="compare: restricted and free report JSON files")
    p.add_argument("--config", type=Path, help="INI-style configuration file")
    p.add_argument("--seed", type=int, help="RNG seed (overrides [run] seed)")
    p.add_argument("--out", type=Path, help="output directory (default runs/<command>)")
    p.add_argument("--reproducible", action="store_true", help="omit timestamps for bit-stable outputs")
    p.add_argument("--mode", choices=(MODE_A, MODE_B, "both"))
    p.add_argument("--rate", help="fixed:X or free")
    p.add_argument("--grid-phi", help="a:b:n")
    p.add_argument("--grid-sigma", help="a:b:n")
    p.add_argument("--data", help="observation CSV for estimate")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _apply_flags(cfg: RunConfig, args) -> int:
    if args.mode:
        cfg.set("estimation", "mode", args.mode)
    if args.rate:
        parse_rate(args.rate)
        cfg.set("estimation", "rate", args.rate)
    if args.grid_phi:
        parse_grid(args.grid_phi)
        cfg.set("sweep", "phi", args.grid_phi)
    if args.grid_sigma:
        parse_grid(args.grid_sigma)
        cfg.set("sweep", "sigma_Theta", args.grid_sigma)
    if args.data:
        cfg.set("io", "data", args.data)
    if args.reports:
        if args.command != "compare" or len(args.reports) != 2:
            raise ConfigError("positional report files are only valid as 'compare A.json B.json'")
        cfg.set("compare", "report_a", args.reports[0])
        cfg.set("compare", "report_b", args.reports[1])
    seed = args.seed if args.seed is not None else _num(cfg, "run", "seed", 0, int)
    if seed < 0 or seed >= 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    cfg.set("run", "seed", seed)
    return seed


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
        seed = _apply_flags(cfg, args)
        cfg.validate()
        out = RunDir(args.out or Path("runs") / args.command, args.reproducible)
        out.write("config.ini", cfg.to_ini())
        return COMMANDS[args.command](cfg, seed, out)
    except (ConfigError, marketdata.DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
