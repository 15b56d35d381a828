"""Time the hot kernels with numba against the plain-numpy fallback.

Each path runs in its own interpreter because the flag
``NOISYREE_DISABLE_NUMBA`` is read once at import::

    python benchmarks/bench_kernels.py [--repeat 5] [--starts 50] [--T 300]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json, sys, time
from noisyree import _accel
from noisyree.model import PriceCoefficients, table_params
from noisyree.solver import SolverConfig, solve_candidates
from noisyree.statespace import exact_discretize, kalman_loglik, simulate

repeat, starts, T = map(int, sys.argv[1:4])
params = table_params()
model = exact_discretize(params, PriceCoefficients(-2.0, 8.0, 1.0, 5.0), 1.0)
ys = simulate(model, T=T, seed=0)
cfg = SolverConfig(n_starts=starts, rng_seed=0)

# warm-up covers JIT compilation (or the on-disk cache load)
kalman_loglik(model, ys)
solve_candidates(params, SolverConfig(n_starts=2, rng_seed=0))

def best(fn):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)

print(json.dumps({
    "numba": _accel.USE_NUMBA,
    "kalman_loglik": best(lambda: kalman_loglik(model, ys)),
    "solve_candidates": best(lambda: solve_candidates(params, cfg)),
}))
"""


def run(disable: bool, repeat: int, starts: int, T: int) -> dict:
    env = dict(os.environ)
    env.pop("NOISYREE_DISABLE_NUMBA", None)
    if disable:
        env["NOISYREE_DISABLE_NUMBA"] = "1"
    out = subprocess.run(
        [sys.executable, "-c", _WORKER, str(repeat), str(starts), str(T)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--starts", type=int, default=50, help="solver multi-start count")
    ap.add_argument("--T", type=int, default=300, help="series length for the filter")
    args = ap.parse_args(argv)
    fast = run(False, args.repeat, args.starts, args.T)
    slow = run(True, args.repeat, args.starts, args.T)
    print(f"{'kernel':<20}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}")
    for key in ("kalman_loglik", "solve_candidates"):
        print(f"{key:<20}{fast[key]:>12.4f}{slow[key]:>12.4f}{slow[key] / fast[key]:>9.1f}x")


if __name__ == "__main__":
    main()
