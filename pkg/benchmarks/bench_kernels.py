"""Compare the numba-compiled kernels against the pure-Python fallback.

Each backend runs in its own interpreter because the choice is made at
import time from ``FOODCHAIN_DISABLE_JIT``.

    python benchmarks/bench_kernels.py [--repeat N] [--t-end T]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

WORKER = r"""
import json, sys, time
import numpy as np
from foodchain import backend, kernels
from foodchain.model import HOLLING_DEFAULT

t_end, repeat = float(sys.argv[1]), int(sys.argv[2])
p = HOLLING_DEFAULT.with_d2(0.081).packed()
y0 = np.array([0.45, 0.5, 0.8])
out = np.empty(3)

def best(fn):
    fn()  # warm-up (compilation or cache load for numba)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)

res = {
    "backend": backend(),
    "field x1e4": best(lambda: [kernels.field(0, p, y0, out) for _ in range(10000)]),
    "integrate": best(lambda: kernels.integrate_final(0, p, y0, 0.0, t_end, 1e-9, 1e-11, 0.5, 10**8)),
    "window+lyap": best(lambda: kernels.window_scan(p, y0, 0.0, t_end, 1e-9, 1e-11, 0.5, 10**8,
                                                    True, 1.0, 0.0, 10000)),
}
print(json.dumps(res))
"""


def run(disable: bool, t_end: float, repeat: int) -> dict:
    env = dict(os.environ, FOODCHAIN_DISABLE_JIT="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", WORKER, str(t_end), str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--t-end", type=float, default=200.0,
                    help="integration length per timed call (default 200)")
    args = ap.parse_args()
    t0 = time.perf_counter()
    fast = run(False, args.t_end, args.repeat)
    slow = run(True, args.t_end, args.repeat)
    print(f"{'kernel':<14}{fast['backend']:>12}{slow['backend']:>12}{'speedup':>10}")
    for key in ("field x1e4", "integrate", "window+lyap"):
        a, b = fast[key], slow[key]
        print(f"{key:<14}{a * 1e3:>10.2f}ms{b * 1e3:>10.2f}ms{b / a:>9.0f}x")
    print(f"(t_end={args.t_end}, best of {args.repeat}; total {time.perf_counter() - t0:.1f} s)")


if __name__ == "__main__":
    main()
