"""Compare the compiled kernels with the numpy fallback.

Times the three hot kernels on synthetic inputs and one full windowed solve
with each backend, then prints a table of median times and speed-ups.

Usage::

    python benchmarks/bench_backends.py --reps 7 --json bench_backends.json
"""

import argparse
import json
import statistics
import sys
import timeit

import numpy as np

from transect_ipp import GpHyperParams, PlanRequest, TransectGrid, _backend, solve
from transect_ipp.gp_core import cov_matrix


def kernel_cases(rng, batch, dim, chi, arity, sweeps):
    """Return ``{name: callable(kernels)}`` for the kernel-level timings."""
    g = TransectGrid(6, 40, 1.0, 1.0)
    K = np.ascontiguousarray(cov_matrix(g.locations(), GpHyperParams(1.0, 0.05, 3.0, 1.5)))
    idx = np.array([np.sort(rng.choice(len(K), size=dim, replace=False)) for _ in range(batch)], dtype=np.intp)
    jitter = np.zeros(batch)
    W = chi**arity
    interior = rng.normal(size=(W, chi))
    terminal = rng.normal(size=(W, chi))
    scores = rng.normal(size=(batch, chi))
    return {
        f"subset_logdet B={batch} d={dim}": lambda kern: kern.subset_logdet(K, idx, jitter),
        f"dp_backward W={W} sweeps={sweeps}": lambda kern: kern.dp_backward(interior, terminal, sweeps, 1e-12),
        f"first_argmax B={batch} chi={chi}": lambda kern: kern.first_argmax(scores, 1e-12),
    }


def time_call(fn, reps, number):
    times = timeit.repeat(fn, repeat=reps, number=number)
    return statistics.median(times) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--reps", type=int, default=5, help="timing repetitions (median is reported)")
    parser.add_argument("--batch", type=int, default=2000, help="submatrices per subset_logdet call")
    parser.add_argument("--dim", type=int, default=6, help="submatrix dimension")
    parser.add_argument("--rows", type=int, default=5)
    parser.add_argument("--cols", type=int, default=30)
    parser.add_argument("--robots", type=int, default=2)
    parser.add_argument("--m", type=int, default=2, help="Markov order of the full solve")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--json", help="also write the results as JSON")
    args = parser.parse_args(argv)

    available = sorted(_backend.BACKENDS)
    if "compiled" not in available:
        print("compiled kernels are not built; only the numpy fallback is timed", file=sys.stderr)
    rng = np.random.default_rng(args.seed)
    cases = kernel_cases(rng, args.batch, args.dim, chi=10, arity=3, sweeps=args.cols)
    req = PlanRequest(
        TransectGrid(args.rows, args.cols, 5.0, 5.0),
        GpHyperParams(0.1542, 0.0036, 40.45, 16.0),
        args.robots,
        "mepp_m",
        args.m,
    )

    results = {}
    previous = _backend.NAME
    try:
        for name in available:
            _backend.use(name)
            kern = _backend.kernels
            row = {label: time_call(lambda f=f: f(kern), args.reps, 5) for label, f in cases.items()}
            row[f"solve mepp_m r={args.rows} n={args.cols} k={args.robots} m={args.m}"] = time_call(
                lambda: solve(req), args.reps, 1
            )
            results[name] = row
    finally:
        _backend.use(previous)

    labels = list(next(iter(results.values())))
    width = max(len(s) for s in labels)
    header = f"{'case':<{width}}  " + "  ".join(f"{b + ' [s]':>14}" for b in available)
    if len(available) == 2:
        header += f"  {'speed-up':>9}"
    print(header)
    for label in labels:
        line = f"{label:<{width}}  " + "  ".join(f"{results[b][label]:>14.6g}" for b in available)
        if len(available) == 2:
            line += f"  {results['python'][label] / results['compiled'][label]:>8.2f}x"
        print(line)

    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"unit": "seconds", "reps": args.reps, "results": results}, fh, indent=2)
            fh.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
