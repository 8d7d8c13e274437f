"""Compare the compiled and pure-Python kernels on the three hot loops.

Run with ``python3 benchmarks/bench_kernels.py``. Each row is the best of
several runs; the speedup column is python time over compiled time.
"""

import argparse
import time

from flexsched import _kernels
from flexsched.adjust import adjust_realistic, adjust_rectangular
from flexsched.baselines import brute_force_optimal
from flexsched.generators import SyntheticConfig, generate_synthetic
from flexsched.model import ShapeKind
from flexsched.relax import solve_relaxation


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(J):
    rect = generate_synthetic(SyntheticConfig(J=J, T=24), 1)
    real = generate_synthetic(SyntheticConfig(J=J, T=24, shape=ShapeKind.REALISTIC), 1)
    small = generate_synthetic(SyntheticConfig(J=7, T=7, shape=ShapeKind.REALISTIC, slack_range=(0, 3)), 3)
    S_rect = solve_relaxation(rect).schedule
    S_real = solve_relaxation(real).schedule
    return [
        (f"cycle cancellation J={J}", lambda k: adjust_rectangular(rect, S_rect, kernels=k)),
        (f"pair shifts J={J}", lambda k: adjust_realistic(real, S_real, kernels=k)),
        ("exact search J=7 T=7", lambda k: brute_force_optimal(small, kernels=k)),
    ]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--J", type=int, default=200)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args(argv)
    backends = _kernels.available()
    if "cython" not in backends:
        print("compiled kernels not built; run: python3 setup.py build_ext --inplace")
        return 1
    mods = {name: _kernels.load(name) for name in ("cython", "python")}
    print(f"{'kernel':<28}{'cython s':>12}{'python s':>12}{'speedup':>10}")
    for label, run in cases(args.J):
        t = {name: best_of(lambda: run(mod), args.repeats) for name, mod in mods.items()}
        print(f"{label:<28}{t['cython']:>12.5f}{t['python']:>12.5f}{t['python'] / t['cython']:>10.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
