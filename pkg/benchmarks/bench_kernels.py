#!/usr/bin/env python3
"""Throughput comparison: compiled codec kernels vs the pure-Python twin.

Usage: python benchmarks/bench_kernels.py [--n 200000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from actiongrid import GaussianParams, GridSpec, build_action_grid, kernels
from actiongrid.verify import random_normalized_actions, random_token_triples


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--n", type=int, default=200_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    params = GaussianParams(mu=(1.5, 0.0, 0.6, 0.0, 0.0, 0.0),
                            sigma=(0.5, 1.5, 0.25, 0.35, 0.35, 0.35),
                            sample_count=1000)
    grid = build_action_grid(params, GridSpec())
    rng = np.random.default_rng(0)
    actions = random_normalized_actions(args.n, rng)
    tokens = random_token_triples(grid, args.n, rng)

    backends = [("pure", kernels.pure_module())]
    if kernels.compiled_module() is not None:
        backends.insert(0, ("compiled", kernels.compiled_module()))
    else:
        print("compiled kernels unavailable; benchmarking the fallback only")

    results = {}
    for name, impl in backends:
        enc = best_of(lambda: kernels.encode_batch(actions, grid, impl=impl),
                      args.repeat)
        dec = best_of(lambda: kernels.decode_batch(tokens, grid, impl=impl),
                      args.repeat)
        results[name] = (enc, dec)
        print(f"{name:>9}  encode {args.n} rows: {enc:8.4f} s "
              f"({args.n / enc / 1e6:6.2f} M/s)   "
              f"decode: {dec:8.4f} s ({args.n / dec / 1e6:6.2f} M/s)")

    if "compiled" in results and "pure" in results:
        enc_speedup = results["pure"][0] / results["compiled"][0]
        dec_speedup = results["pure"][1] / results["compiled"][1]
        print(f"{'speedup':>9}  encode {enc_speedup:.1f}x   decode {dec_speedup:.1f}x")

    # the two backends must agree bit for bit
    if len(backends) == 2:
        ref_tok = kernels.encode_batch(actions, grid, impl=backends[1][1])
        fast_tok = kernels.encode_batch(actions, grid, impl=backends[0][1])
        ref_dec = kernels.decode_batch(tokens, grid, impl=backends[1][1])
        fast_dec = kernels.decode_batch(tokens, grid, impl=backends[0][1])
        assert np.array_equal(ref_tok, fast_tok)
        assert ref_dec.tobytes() == fast_dec.tobytes()
        print("backends agree bit-for-bit on this workload")


if __name__ == "__main__":
    main()
