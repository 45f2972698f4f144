"""Compare the numba and numpy executor backends.

Run with ``python benchmarks/bench_kernels.py``. Each case is timed after a
warm-up call (so numba compilation is excluded) and the two backends'
outputs are checked for bitwise equality before any timing is reported.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from threshprof.config import preset
from threshprof.memplan import schedule
from threshprof.refexec import checksum, exec_scheduled, init_weights, random_input
from threshprof.refexec.kernels import get_kernels, numba_available
from threshprof.shapes import TensorShape
from threshprof.topology import build_graph


def best_of(fn, repeats):
    fn()
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def conv_case(c_in, c_out, size, k):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((1, c_in, size + k - 1, size + k - 1)).astype(np.float32)
    w = rng.standard_normal((c_out, c_in, k, k)).astype(np.float32)
    return x, w, size


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--input", type=int, default=64, help="network input size")
    args = ap.parse_args()
    backends = ["numpy"] + (["numba"] if numba_available() else [])
    if len(backends) == 1:
        print("numba is not installed; timing the numpy backend only")

    print(f"{'case':<34}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for c_in, c_out, size, k in [(64, 32, 28, 3), (128, 128, 14, 1), (480, 68, 14, 3), (3, 64, 112, 3)]:
        x, w, n = conv_case(c_in, c_out, size, k)
        outs, times = [], []
        for b in backends:
            kern = get_kernels(b)
            outs.append(kern.conv2d(x, w, None, 1, n, n)[0])
            times.append(best_of(lambda: kern.conv2d(x, w, None, 1, n, n), args.repeats))
        assert all(o.tobytes() == outs[0].tobytes() for o in outs), "backends disagree"
        row = f"conv {c_in}->{c_out} k{k} @{size}x{size}"
        speed = f"{times[0] / times[-1]:>9.1f}x" if len(times) > 1 else ""
        print(f"{row:<34}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times) + speed)

    g = build_graph(preset("threshnet79"))
    s = TensorShape(1, 3, args.input, args.input)
    wts, x = init_weights(g, 42, s), random_input(s, 42)
    sched = schedule(g)
    sums, times = [], []
    for b in backends:
        sums.append(checksum(exec_scheduled(g, sched, wts, x, backend=b)))
        times.append(best_of(lambda: exec_scheduled(g, sched, wts, x, backend=b), args.repeats))
    assert len(set(sums)) == 1, f"backends disagree: {sums}"
    row = f"threshnet79 @{args.input}x{args.input}"
    speed = f"{times[0] / times[-1]:>9.1f}x" if len(times) > 1 else ""
    print(f"{row:<34}" + "".join(f"{t:>11.2f}s" for t in times) + speed)
    print(f"checksum {sums[0]} on every backend")


if __name__ == "__main__":
    main()
