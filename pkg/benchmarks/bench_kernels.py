"""Compiled kernels against the numpy fallback on identical workloads.

    python benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0]

Each workload runs on both backends, the outputs are checked for agreement,
and the best wall time per backend is reported with the speed-up.
"""

import argparse
import time

import numpy as np

from vgcontract.kernels import get_backend
from vgcontract.model import Logistic, ModelParams
from vgcontract.network import MeanFieldSpec, ProductLogistic

P = ModelParams(0.0, 1.0, 1.0, 1.0, 0.3, Logistic(0.2, 2.6, 8.0, 0.5))
H1 = ProductLogistic(0.05, 0.4, 3.0, 0.4)
SEED, DT = 7, 1e-3


def workloads(scale):
    n = max(int(2000 * scale), 1)
    steps = max(int(1000 * scale), 1)
    model = P.packed()
    z, o = np.zeros(n), np.ones(n)
    streams = np.arange(n, dtype=np.uint64)
    R, N = 8, 32
    net_model = MeanFieldSpec(P.G, H1).model(P).packed()
    nz = np.full((R, N), 0.2)
    nstreams = np.arange(R * N, dtype=np.uint64).reshape(R, N)
    return {
        f"single n={n} steps={steps}":
            lambda k: k.run_single(model, z, z, SEED, streams, steps, DT, steps),
        f"mirror pairs n={n} steps={steps}":
            lambda k: k.run_pair(model, z, z, o, 3 * o, SEED, streams, steps, DT, steps, 1, 1e-3),
        f"network R={R} N={N} steps={steps}":
            lambda k: k.run_network(net_model, H1.packed(), nz, nz, SEED, nstreams, steps, DT, steps, False),
    }


def best_time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=float, default=1.0)
    args = ap.parse_args(argv)
    py, cc = get_backend("python"), get_backend("compiled")
    print(f"{'workload':40s} {'python [s]':>11s} {'compiled [s]':>13s} {'speed-up':>9s} {'max |diff|':>11s}")
    for name, run in workloads(args.scale).items():
        tp, op = best_time(lambda: run(py), args.repeat)
        tc, oc = best_time(lambda: run(cc), args.repeat)
        diff = max(float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) for a, b in zip(op, oc))
        print(f"{name:40s} {tp:11.4f} {tc:13.4f} {tp / tc:8.1f}x {diff:11.1e}")


if __name__ == "__main__":
    main()
