"""Benchmark the compiled similarity kernels against the pure-Python fallback.

Run after `pip install -e .` (which builds the extension):

    python benchmarks/bench_kernels.py

Workload mirrors the hot paths: novelty scoring of a pending-insight pool
against subgroup profiles, and best-match lookup during idea clustering.
"""

from __future__ import annotations

import random
import time

import numpy as np

from swarmchat import _kernels_py

try:
    from swarmchat import _speedups
except ImportError:
    _speedups = None


def make_sets(rng, n_sets, vocab, lo, hi):
    sets = []
    for _ in range(n_sets):
        size = rng.randint(lo, hi)
        ids = np.array(sorted(rng.sample(range(vocab), size)), dtype=np.int32)
        sets.append(ids)
    return sets


def flatten(sets):
    offsets = np.zeros(len(sets) + 1, dtype=np.int64)
    np.cumsum([len(s) for s in sets], out=offsets[1:])
    flat = np.concatenate(sets).astype(np.int32) if sets else np.empty(0, np.int32)
    return flat, offsets


def bench(label, fn, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    print(f"  {label:<28} {best * 1000:9.2f} ms")
    return best


def main():
    rng = random.Random(7)
    vocab = 3000
    pool = make_sets(rng, 64, vocab, 4, 12)          # pending insights
    profiles = make_sets(rng, 2000, vocab, 60, 160)  # subgroup windows over time
    nodes = make_sets(rng, 500, vocab, 4, 12)        # idea nodes
    queries = make_sets(rng, 3000, vocab, 4, 12)     # incoming messages

    pool_flat, pool_off = flatten(pool)
    node_flat, node_off = flatten(nodes)
    candidates = np.arange(len(nodes), dtype=np.int64)
    out = np.empty(len(pool), dtype=np.float64)

    backends = [("python", _kernels_py)]
    if _speedups is not None:
        backends.append(("cython", _speedups))
    else:
        print("extension not built; showing pure python only")

    results = {}
    for name, mod in backends:
        print(f"{name} backend:")

        def novelty_run(mod=mod):
            for prof in profiles:
                mod.novelty_many(pool_flat, pool_off, prof, out)

        def cluster_run(mod=mod):
            for q in queries:
                mod.best_jaccard(node_flat, node_off, q, candidates)

        def pairwise_run(mod=mod):
            for q in queries:
                mod.jaccard_sorted(q, pool[0])

        results[name, "novelty x2000 profiles"] = bench("novelty x2000 profiles", novelty_run)
        results[name, "cluster match x3000 msgs"] = bench("cluster match x3000 msgs", cluster_run)
        results[name, "jaccard x3000 pairs"] = bench("jaccard x3000 pairs", pairwise_run)

    if _speedups is not None:
        print("speedup (python / cython):")
        for key in ("novelty x2000 profiles", "cluster match x3000 msgs", "jaccard x3000 pairs"):
            ratio = results["python", key] / results["cython", key]
            print(f"  {key:<28} {ratio:8.1f}x")


if __name__ == "__main__":
    main()
