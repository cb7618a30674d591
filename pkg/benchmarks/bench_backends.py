"""Benchmark the compiled extension against the NumPy reference backend.

Runs the inner-loop kernels on representative shapes and reports median call
times, the speedup, and the largest disagreement between the two
implementations.  Optionally times a full model fit in subprocesses with
KNPCHOICE_BACKEND forced to each backend.

Usage:
    python3 benchmarks/bench_backends.py [--n 4000] [--repeats 200]
                                         [--fit-n 300] [--skip-fit]
"""

import argparse
import json
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from knpchoice import _ref_backend
from knpchoice.hermite import HermiteDistribution

try:
    from knpchoice import _fastcore
except ImportError:
    _fastcore = None


def time_call(fn, args, repeats):
    """Median seconds per call (one warm-up call, then `repeats` timed)."""
    fn(*args)
    out = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        out.append(time.perf_counter() - t0)
    return statistics.median(out)


def bench_kernels(n, h_max, repeats, rng):
    u = np.concatenate([rng.standard_normal(n - 4) * 3.0, [-50.0, -1.0, 1.0, 50.0]])
    dist = HermiteDistribution(tuple(rng.uniform(-0.3, 0.3, 6)))
    coefs = dist.coefs
    gamma, psi = dist.gamma, dist.psi

    cases = [
        ("partial_moment_matrix", (u, h_max)),
        ("power_phi_matrix", (u, h_max)),
        ("squared_poly_phi", (u, coefs)),
        ("cdf_values", (u, gamma, psi)),
    ]

    print(f"kernel timings (n={n}, h_max={h_max}, median of {repeats} calls)")
    header = f"{'kernel':24} {'numpy':>10} {'compiled':>10} {'speedup':>8} {'max|diff|':>10}"
    print(header)
    print("-" * len(header))
    for name, args in cases:
        ref_fn = getattr(_ref_backend, name)
        t_ref = time_call(ref_fn, args, repeats)
        if _fastcore is None:
            print(f"{name:24} {t_ref * 1e3:8.3f}ms {'--':>10} {'--':>8} {'--':>10}")
            continue
        fast_fn = getattr(_fastcore, name)
        t_fast = time_call(fast_fn, args, repeats)
        diff = float(np.max(np.abs(np.asarray(ref_fn(*args)) - np.asarray(fast_fn(*args)))))
        print(
            f"{name:24} {t_ref * 1e3:8.3f}ms {t_fast * 1e3:8.3f}ms "
            f"{t_ref / t_fast:7.2f}x {diff:10.2e}"
        )


_FIT_SNIPPET = """
import json, time
import numpy as np
from knpchoice import backend
from knpchoice.core import Dataset, FitConfig, fit

n = {n}
rng = np.random.default_rng(0)
v = rng.standard_normal(n)
w = rng.uniform(-2.0, 2.0, (n, 1))
g0 = np.sin(np.pi * w[:, 0]) + 0.5 * w[:, 0] ** 2
y = (v + g0 - rng.standard_normal(n) > 0).astype(np.float64)
cfg = FitConfig(radius=10.0, order=4, n_components=15, n_restarts=2, seed=0)
t0 = time.perf_counter()
model = fit(Dataset(y, v, w), cfg)
dt = time.perf_counter() - t0
print(json.dumps({{"backend": backend.BACKEND, "seconds": dt,
                   "objective": model.objective_value}}))
"""


def bench_fit(fit_n):
    print(f"\nfull fit (n={fit_n}, order=4, 15 components, 2 restarts)")
    results = {}
    for requested in ("numpy", "compiled"):
        if requested == "compiled" and _fastcore is None:
            print("  compiled: extension not built, skipped")
            continue
        env = dict(os.environ, KNPCHOICE_BACKEND=requested)
        proc = subprocess.run(
            [sys.executable, "-c", _FIT_SNIPPET.format(n=fit_n)],
            env=env, capture_output=True, text=True, check=True,
        )
        results[requested] = json.loads(proc.stdout.strip().splitlines()[-1])
        r = results[requested]
        print(f"  {requested:8}: {r['seconds']:8.3f}s  objective={r['objective']:.12f}")
    if len(results) == 2:
        ratio = results["numpy"]["seconds"] / results["compiled"]["seconds"]
        dobj = abs(results["numpy"]["objective"] - results["compiled"]["objective"])
        print(f"  speedup {ratio:.2f}x, objective difference {dobj:.2e}")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=4000, help="points per kernel call")
    parser.add_argument("--h-max", type=int, default=12, help="highest moment order")
    parser.add_argument("--repeats", type=int, default=200, help="timed calls per kernel")
    parser.add_argument("--fit-n", type=int, default=300, help="sample size of the fit run")
    parser.add_argument("--skip-fit", action="store_true", help="kernel timings only")
    args = parser.parse_args(argv)

    if _fastcore is None:
        print("compiled extension not importable; timing the NumPy backend only\n")
    rng = np.random.default_rng(7)
    bench_kernels(args.n, args.h_max, args.repeats, rng)
    if not args.skip_fit:
        bench_fit(args.fit_n)
    return 0


if __name__ == "__main__":
    sys.exit(main())
