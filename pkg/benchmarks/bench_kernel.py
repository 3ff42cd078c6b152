"""Time kernel matrix assembly with the compiled kernels and the numpy fallback.

    python benchmarks/bench_kernel.py --m 1000 --p 3

The numpy path is timed in the same process by passing ``use_numba=False``,
which is what ``DAGKERNELS_DISABLE_NUMBA=1`` selects globally.
"""
import argparse
import time

import numpy as np

from dagkernels import _accel
from dagkernels.arch import preset
from dagkernels.dual import gaussian_dual
from dagkernels.kernel import kernel_array
from dagkernels.regression import sample_inputs


def bench(name, p, m, kind, use_numba, repeat):
    dag = preset(name, p, gaussian_dual())
    X = sample_inputs(m, dag.reference_dim // p, p, 0).X
    kernel_array(dag, None, kind, X[:8], use_numba=use_numba)      # compile / warm up
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        kernel_array(dag, None, kind, X, use_numba=use_numba)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--p", type=int, default=3)
    ap.add_argument("--m", type=int, default=1000)
    ap.add_argument("--kind", default="ntk", choices=("nngp", "ntk"))
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--arch", nargs="+", default=["mlp", "d_cnn", "hr_cnn", "hr_cnn_gap"])
    args = ap.parse_args(argv)
    print(f"m={args.m} p={args.p} kind={args.kind} numba={'on' if _accel.USE_NUMBA else 'off'}")
    print(f"{'arch':12s} {'numba s':>9s} {'numpy s':>9s} {'speedup':>8s}")
    for name in args.arch:
        fast = bench(name, args.p, args.m, args.kind, True, args.repeat) if _accel.USE_NUMBA \
            else float("nan")
        slow = bench(name, args.p, args.m, args.kind, False, args.repeat)
        print(f"{name:12s} {fast:9.3f} {slow:9.3f} {slow / fast:8.1f}")


if __name__ == "__main__":
    main()
