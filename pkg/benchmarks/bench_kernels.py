"""Compare the compiled and numpy quartet kernels.

Usage: ``python3 benchmarks/bench_kernels.py [--sizes 64 128 256] [--repeat 3]``

Prints one line per (kernel, N) with the best wall time of each backend, the
speed-up and the max relative difference between the two results.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from nlspsd import _pykernels
from nlspsd.kernels import get_backend


def _best(fn, repeat: int) -> tuple[float, object]:
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--batch", type=int, default=4, help="spectra per fwm_sum call")
    args = p.parse_args()
    fast = get_backend("cython")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<10}{'N':>6}{'numpy [s]':>12}{'cython [s]':>12}{'speed-up':>10}{'rel diff':>11}")
    for n in args.sizes:
        w = 2 * np.pi / n * (np.arange(n) - n // 2)
        beta = -(w**2)
        s = rng.random(n)
        labels = (np.arange(n) * 3 // n).astype(np.int64)
        q = rng.standard_normal((args.batch, n)) + 1j * rng.standard_normal((args.batch, n))
        cases = {
            "psd_sums": lambda m: m.psd_sums(s, beta, 0.0, 1.0, 1, None, labels, 1),
            "fwm_sum": lambda m: m.fwm_sum(q, beta, 0.0, 1.0, 1, None),
        }
        for name, call in cases.items():
            t_py, r_py = _best(lambda: call(_pykernels), args.repeat)
            t_c, r_c = _best(lambda: call(fast), args.repeat)
            if isinstance(r_py, tuple):
                diff = max(_rel(a, b) for a, b in zip(r_c, r_py))
            else:
                diff = _rel(r_c, r_py)
            print(f"{name:<10}{n:>6}{t_py:>12.4f}{t_c:>12.4f}{t_py / t_c:>10.1f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
