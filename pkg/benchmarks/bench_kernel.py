"""Compare the compiled event loop with the pure-Python fallback.

    python benchmarks/bench_kernel.py [--horizon 2e4]

Both backends get identical inputs and generator state; the script checks
their outputs agree bit for bit and reports events per second.
"""

import argparse
import time

import numpy as np

from cachefresh import _kernel_py
from cachefresh.simulator import stream_state

try:
    from cachefresh import _kernel
except ImportError:
    _kernel = None

CASES = {
    "single cache": (1.0, [2.0], [1.0], [3.0], [1.0]),
    "3-cache chain": (1.0, [2.0, 3.0, 4.0], [1.0, 1.0, 1.0], [5.0], [1.0]),
    "star, 3 users, lossy": (0.5, [2.0], [0.8], [1.0, 3.0, 6.0], [0.9, 1.0, 0.7]),
}


def timed(fn, args):
    start = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - start


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--horizon", type=float, default=2e4)
    opts = parser.parse_args()
    print(f"{'case':24s} {'events':>9s} {'python ev/s':>12s} {'compiled ev/s':>14s} {'speedup':>8s}")
    for name, (lam, chain, cp, users, up) in CASES.items():
        args = (lam, np.array(chain), np.array(cp), np.array(users), np.array(up),
                opts.horizon, 0.0, stream_state(0, 0, 0))
        slow, t_slow = timed(_kernel_py.simulate_path, args)
        events = slow[1]
        line = f"{name:24s} {events:9d} {events / t_slow:12.3g}"
        if _kernel is not None:
            fast, t_fast = timed(_kernel.simulate_path, args)
            assert np.array_equal(fast[0], slow[0]) and fast[1:] == slow[1:], "backends disagree"
            line += f" {events / t_fast:14.3g} {t_slow / t_fast:7.0f}x"
        else:
            line += f" {'(not built)':>14s}"
        print(line)


if __name__ == "__main__":
    main()
