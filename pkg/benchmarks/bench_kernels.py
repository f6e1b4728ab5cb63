"""Compare the compiled and pure-Python kernels on one Monte Carlo-sized trace.

    python benchmarks/bench_kernels.py [--K 10000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from lcfountain import _kernels_py
from lcfountain.channel import generate_batches
from lcfountain.decoder import DecoderConfig, _flatten
from lcfountain.profiles import lc2, reference_psi_a, reference_psi_b

try:
    from lcfountain import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--K", type=int, default=10_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    g = lc2(0.25, 0.25, 0.5)
    N = int(np.ceil(args.K / 0.47))
    rng = np.random.default_rng(0)
    trace, _ = generate_batches([(args.K, reference_psi_a()), (args.K, reference_psi_b())], g, N, rng)
    table = DecoderConfig("ge").table(trace.matrices).release_table()
    koff, cptr, cidx, iptr, iadj = _flatten(trace)
    dec_args = (trace.L, trace.N, trace.types, table, cptr, cidx, iptr, iadj, int(koff[-1]))

    degs = reference_psi_b().sample(np.random.default_rng(1), N)
    u = np.random.default_rng(2).random(int(degs.sum()))

    backends = [("pure", _kernels_py)] + ([("compiled", _kernels)] if _kernels else [])
    results = {}
    print(f"K={args.K} N={N} neighbors={int(degs.sum())}")
    print(f"{'kernel':<20}{'backend':<10}{'seconds':>10}")
    for name, mod in backends:
        t_dec, out = best_of(lambda: mod.structural_decode(*dec_args), args.repeat)
        t_fl, picks = best_of(lambda: mod.floyd_batch(args.K, degs, u), args.repeat)
        results[name] = (out[0], picks)
        print(f"{'structural_decode':<20}{name:<10}{t_dec:>10.4f}")
        print(f"{'floyd_batch':<20}{name:<10}{t_fl:>10.4f}")
    if len(results) == 2:
        same = all(np.array_equal(a, b) for a, b in zip(results["pure"], results["compiled"]))
        print(f"outputs identical: {same}")


if __name__ == "__main__":
    main()
