#!/usr/bin/env python3
"""Timing experiment for the bounded-arity rewriting pipeline.

Generates rewritable acyclic instances (fixed seed) and reports runtime
percentiles of the full rewrite pipeline, overall and per target class.
"""

import argparse
import random
import statistics
import time

from cqrewrite.randgen import rewritable_instance
from cqrewrite.rewriting import rewrite


def bench(kind: str, target: str, n: int, max_atoms: int, rng: random.Random):
    times = []
    for _ in range(n):
        q, vs = rewritable_instance(rng, kind, max_atoms=max_atoms, max_views=3, max_arity=3)
        t0 = time.perf_counter()
        res = rewrite(q, vs, target=target)
        times.append(time.perf_counter() - t0)
        assert res.status == "ok"
    times.sort()
    return {
        "median": statistics.median(times),
        "p90": times[int(0.9 * (len(times) - 1))],
        "max": times[-1],
    }


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", type=int, default=50, help="instances per class")
    ap.add_argument("--max-atoms", type=int, default=8)
    ap.add_argument("--seed", type=int, default=163)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    print(f"{'class':<16} {'median':>9} {'p90':>9} {'max':>9}")
    for kind, target in (
        ("any", "any"),
        ("acyclic", "acyclic"),
        ("free-connex", "free-connex"),
        ("hierarchical", "hierarchical"),
        ("q-hierarchical", "q-hierarchical"),
    ):
        stats = bench(kind, target, args.n, args.max_atoms, rng)
        print(
            f"{kind:<16} {stats['median'] * 1000:>7.1f}ms {stats['p90'] * 1000:>7.1f}ms {stats['max'] * 1000:>7.1f}ms"
        )
    return 0


if __name__ == "__main__":
    import sys

    sys.exit(main())
