"""Time the numba and numpy backends of the float kernels side by side.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Compilation happens in a warm-up call and is reported separately.
Setting CDRU_DISABLE_NUMBA only changes which backend the library uses;
this script always times both.
"""

import argparse
import time

import numpy as np

from cdru import _kernels
from cdru.hypotest import build_E
from cdru.lattice import order_space


def cases(rng):
    ranks = np.ascontiguousarray(order_space(6).ranks, dtype=np.int64)
    P = rng.dirichlet(np.ones(24), size=24)
    emit = rng.integers(0, 4, size=24).astype(np.int64)
    table = rng.normal(size=(2048, 1 << 7))
    pairs = [(A, B) for A in range(1, 8) for B in range(1, 8)]
    E = _e_args(3, pairs)
    return {
        "maximizer_table (n=6)": ("maximizer_table", (ranks,)),
        "simulate_emissions (1e6 steps)": (
            "simulate_emissions", (np.cumsum(P, axis=1), emit, 0, rng.random(1_000_000), 4)),
        "power_iteration (24 states)": ("power_iteration", (P, np.full(24, 1 / 24), 1e-14, 1_000_000)),
        "superset_transform (2048 x 2^7)": ("superset_transform", (table, 7, -1.0)),
        "fill_extreme (n=3, full)": ("fill_extreme", E),
    }


def _e_args(n, pairs):
    captured = {}
    real = _kernels.fill_extreme

    def grab(*args):
        captured["args"] = args
        return real(*args)

    _kernels.fill_extreme = grab
    try:
        build_E(n, pairs)
    finally:
        _kernels.fill_extreme = real
    a = captured["args"]
    return tuple(np.ascontiguousarray(x, dtype=np.int64) for x in a[:-1]) + (int(a[-1]),)


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not _kernels.HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':34s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s} {'compile':>9s}")
    for label, (name, fargs) in cases(rng).items():
        t0 = time.perf_counter()
        _kernels.numba_impl[name](*fargs)
        compile_s = time.perf_counter() - t0
        t_np = best_of(_kernels.numpy_impl[name], fargs, args.repeat)
        t_nb = best_of(_kernels.numba_impl[name], fargs, args.repeat)
        print(f"{label:34s} {t_np * 1e3:9.2f}ms {t_nb * 1e3:9.2f}ms {t_np / t_nb:7.1f}x {compile_s:8.2f}s")


if __name__ == "__main__":
    main()
