"""Time the numba kernels against the pure-numpy fallback.

Run ``python3 benchmarks/bench_kernels.py``.  The numba timings exclude the
first (compiling) call.  A Trotter series is also timed in a child process
with ISINGMESON_NO_NUMBA=1 so the whole stack runs on numpy.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from isingmeson import kernels
from isingmeson.circuit import rx, rzz


def _time(fn, psi, arg, q, n, repeat):
    work = psi.copy()
    fn(work, arg, q, n)
    return min(timeit.repeat(lambda: fn(work, arg, q, n), number=1, repeat=repeat))


def bench_kernels(L, ncol, repeat):
    rng = np.random.default_rng(0)
    psi = rng.normal(size=(1 << L, ncol)) + 1j * rng.normal(size=(1 << L, ncol))
    psi /= np.linalg.norm(psi)
    cases = {
        "apply_1q": (rx(0.3), L // 2),
        "apply_2q": (np.kron(rx(0.3), rx(0.7)), L // 2 - 1),
        "apply_diag_2q": (np.diag(rzz(0.4)).copy(), L // 2 - 1),
    }
    rows = []
    for name, (arg, q) in cases.items():
        t_np = _time(kernels.NUMPY_KERNELS[name], psi, arg, q, L, repeat)
        t_act = _time(kernels.ACTIVE_KERNELS[name], psi, arg, q, L, repeat)
        rows.append((name, t_np, t_act))
    return rows


SERIES_SNIPPET = """
import time
from isingmeson.circuit import run_trotter_series
from isingmeson.model import ModelSpec
from isingmeson.kernels import BACKEND
spec = ModelSpec({L}, 1.0, 3.0)
run_trotter_series(spec, "U" * {L}, 0.1, 0.2)
t0 = time.perf_counter()
run_trotter_series(spec, "U" * {L}, 0.1, {t_max})
print(BACKEND, time.perf_counter() - t0)
"""


def bench_series(L, t_max):
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, ISINGMESON_NO_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", SERIES_SNIPPET.format(L=L, t_max=t_max)],
                             env=env, capture_output=True, text=True, check=True)
        backend, secs = res.stdout.split()
        out[backend] = float(secs)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, default=16)
    ap.add_argument("--ncol", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--series-L", type=int, default=12)
    ap.add_argument("--t-max", type=float, default=10.0)
    args = ap.parse_args(argv)

    print(f"kernel timings, L={args.L}, ncol={args.ncol} (active backend: {kernels.BACKEND})")
    print(f"{'kernel':<16}{'numpy [ms]':>12}{'active [ms]':>13}{'speedup':>9}")
    for name, t_np, t_act in bench_kernels(args.L, args.ncol, args.repeat):
        print(f"{name:<16}{1e3 * t_np:>12.3f}{1e3 * t_act:>13.3f}{t_np / t_act:>9.2f}")

    s = bench_series(args.series_L, args.t_max)
    print(f"\nTrotter series L={args.series_L}, t_max={args.t_max:g}: "
          + ", ".join(f"{k} {v:.3f} s" for k, v in sorted(s.items())))


if __name__ == "__main__":
    main()
