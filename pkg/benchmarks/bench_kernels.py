"""Compare the compiled and pure-Python sampling kernels.

Usage: python benchmarks/bench_kernels.py [--draws N] [--repeat R]

Times ``draw_matrix`` over one null of each distribution family with every
available backend, checks that all backends return identical floats, and
reports the speed-up of each backend over the Python twin. An end-to-end
``like_apx`` timing on the exponential fixture is included for context.
"""

import argparse
import os
import subprocess
import sys
import time

from numnulls.model import Exponential, Normal, Null, Uniform
from numnulls.rng import backends, draw_matrix

NULLS = [Null(1), Null(2), Null(3)]
DISTS = [Uniform(0.0, 2.0), Exponential(1.0), Normal(0.0, 1.0)]


def best_of(repeat, fn):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def end_to_end(pure: bool) -> float:
    """Time 100 exponential-fixture estimates at epsilon 0.05 in a fresh interpreter."""
    code = (
        "import time; from numnulls import fixtures; from numnulls.approx import like_apx; "
        "f = fixtures.exponential(); t = time.perf_counter(); "
        "[like_apx(f.likelihood, f.db, 0.05, s) for s in range(100)]; print(time.perf_counter() - t)"
    )
    env = dict(os.environ, NUMNULLS_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--draws", type=int, default=200_000, help="draws per null")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    found = backends()
    results = {}
    timings = {}
    for name, kernel in found.items():
        timings[name] = best_of(args.repeat, lambda: draw_matrix(42, NULLS, DISTS, 0, args.draws, backend=kernel))
        results[name] = draw_matrix(42, NULLS, DISTS, 0, args.draws, backend=kernel)

    total = args.draws * len(NULLS)
    base = timings["python"]
    print(f"draw_matrix: {total} draws, best of {args.repeat}")
    for name, t in timings.items():
        print(f"  {name:<7} {t:8.3f}s  {total / t / 1e6:7.2f} M draws/s  speed-up {base / t:6.1f}x")
    identical = all(r == results["python"] for r in results.values())
    print(f"  bit-identical across backends: {identical}")
    if "cython" not in found:
        print("  compiled kernel not built; only the Python twin was timed")

    print("like_apx, exponential fixture, 100 seeds at epsilon 0.05 (gamma 400)")
    for label, pure in (("python", True), ("default", False)):
        print(f"  {label:<7} {end_to_end(pure):8.3f}s")
    return 0 if identical else 1


if __name__ == "__main__":
    sys.exit(main())
