"""Compiled vs pure-Python kernels on the three hot loops.

    python benchmarks/bench_kernels.py [--nodes 2000] [--sets 20000] [--repeat 3]

Each row reports the best wall time of ``--repeat`` runs per backend and the
speed-up. Both backends consume the same random stream, so the outputs are
also compared for equality.
"""
import argparse
import time

import numpy as np

from crowdinfluence import _backend
from crowdinfluence.affinity import CategoryDocument, train
from crowdinfluence.ingest import SocialGraph
from crowdinfluence.propagation import RRRSampler, ic_monte_carlo
from crowdinfluence.synthetic import scale_free_edges


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def graph_of(n, seed):
    rng = np.random.default_rng(seed)
    pairs = scale_free_edges(n, 3, rng)
    nodes = [f"n{i:05d}" for i in range(n)]
    edges = [(nodes[a], nodes[b]) for a, b in pairs] + [(nodes[b], nodes[a]) for a, b in pairs]
    return SocialGraph(nodes, edges)


def corpus(n_docs, length, seed):
    rng = np.random.default_rng(seed)
    vocab = [f"c{i}" for i in range(60)]
    return [CategoryDocument(f"d{i}", [vocab[j] for j in rng.integers(0, 60, size=length)]) for i in range(n_docs)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=2000)
    ap.add_argument("--sets", type=int, default=20000)
    ap.add_argument("--runs", type=int, default=5000)
    ap.add_argument("--docs", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if "compiled" not in _backend.BACKENDS:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")

    g = graph_of(args.nodes, 0)
    docs = corpus(args.docs, 40, 1)
    cases = {
        f"rrr sets ({args.sets}, n={args.nodes})":
            lambda b: RRRSampler(g, seed=7, backend=b).sample(args.sets).members,
        f"ic monte-carlo ({args.runs} runs)":
            lambda b: ic_monte_carlo(g, g.nodes[0], args.runs, seed=7, backend=b),
        f"lda sweeps ({args.docs} docs x 40, 50 sweeps)":
            lambda b: train(docs, num_topics=20, iterations=50, seed=7, backend=b).topic_term,
    }
    print(f"{'kernel':44s} {'compiled s':>11s} {'python s':>10s} {'speed-up':>9s}  same")
    for name, fn in cases.items():
        tc, oc = best_of(lambda: fn("compiled"), args.repeat)
        tp, op = best_of(lambda: fn("python"), args.repeat)
        same = np.array_equal(np.asarray(oc), np.asarray(op))
        print(f"{name:44s} {tc:11.4f} {tp:10.4f} {tp / tc:8.1f}x  {same}")


if __name__ == "__main__":
    main()
