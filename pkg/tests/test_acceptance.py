"""Acceptance criteria 1-10, one test each.

Every criterion is a function returning ``(ok, detail)``. The test records a
one-line verdict (shown in the terminal summary) and then asserts ``ok``.
Run this file directly to print the verdicts without pytest.
"""
import itertools
import math
import os
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest

from crowdinfluence.affinity import CategoryDocument, affinity_from_distributions, infer_topics, train
from crowdinfluence.assign import DIA, EIA, FLOW_STRATEGIES, IA, MTA, assign_pairs, edge_cost
from crowdinfluence.harness import ExperimentConfig, run_experiment
from crowdinfluence.influence import entropy_from_counts
from crowdinfluence.ingest import HistoryRecord, SocialGraph
from crowdinfluence.mobility import fit_pareto, hop_lengths, rwr_stationary
from crowdinfluence.model import PLANAR, CandidatePair
from crowdinfluence.propagation import (ROOT_FRACTION, SCALED, RPOParams, ic_monte_carlo, informed_range,
                                        propagation_matrix, rpo_collection)
from crowdinfluence.synthetic import synthetic_world

sys.path.insert(0, os.path.dirname(__file__))
import conftest  # noqa: E402
from oracles import best_matching, golden_section_max, rwr_linear_solve  # noqa: E402


def record(num, name, ok, detail):
    line = f"criterion {num:2d} {name:<28s} {'PASS' if ok else 'FAIL'}  {detail}"
    conftest.ACCEPTANCE[num] = line
    print(line)
    return ok


# 1 ---------------------------------------------------------------------------

def criterion_1():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(500):
        W, S = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        pairs = [CandidatePair(f"w{i}", f"s{j}", float(rng.uniform(0, 10)), 0.0)
                 for i in range(W) for j in range(S) if rng.random() < 0.4]
        inf = {(p.worker_id, p.task_id): float(rng.exponential(2.0)) for p in pairs}
        ent = {f"s{j}": float(rng.uniform(0, 2)) for j in range(S)}
        radius = {f"w{i}": 8.0 for i in range(W)}
        for strat in FLOW_STRATEGIES:
            plan = assign_pairs(strat, pairs, inf, ent, radius)
            edges = [(p.worker_id, p.task_id,
                      edge_cost(strat, inf[(p.worker_id, p.task_id)], ent[p.task_id], p.distance_km, 8.0))
                     for p in pairs]
            card, cost = best_matching(edges)
            if plan.cardinality != card or abs(plan.total_cost - cost) > 1e-9:
                bad += 1
    secs = time.perf_counter() - t0
    ok = bad == 0 and secs < 30
    return ok, f"{bad} mismatches over 500 instances x {len(FLOW_STRATEGIES)} strategies, {secs:.1f}s"


# 2 ---------------------------------------------------------------------------

def _random_small_graph(rng, idx):
    n = int(rng.integers(4, 13))
    nodes = [f"g{idx}n{i:02d}" for i in range(n)]
    p = float(rng.uniform(0.15, 0.4))
    edges = [(a, b) for a, b in itertools.permutations(nodes, 2) if rng.random() < p]
    return SocialGraph(nodes, edges)


def pairwise_agreement(estimator, params=RPOParams(), n_graphs=20, mc_runs=100_000, seed=2):
    """Pairs whose RPO estimate misses the MC oracle by more than max(0.05, 3 SE)."""
    rng = np.random.default_rng(seed)
    worst = misses = total = 0
    for g_i in range(n_graphs):
        g = _random_small_graph(rng, g_i)
        coll, _ = rpo_collection(g, params, seed=g_i)
        P = np.clip(propagation_matrix(coll, estimator).toarray(), 0, 1)
        for s in g.nodes:
            si = g.index[s]
            mc = ic_monte_carlo(g, s, mc_runs, seed=1000 * g_i + si)
            for i in range(len(g)):
                if i == si:
                    continue
                tol = max(0.05, 3 * math.sqrt(mc[i] * (1 - mc[i]) / mc_runs))
                err = abs(P[si, i] - mc[i])
                worst = max(worst, err)
                misses += err > tol
                total += 1
    return misses, total, worst


def criterion_2():
    t0 = time.perf_counter()
    misses, total, worst = pairwise_agreement(SCALED)
    alt = pairwise_agreement(ROOT_FRACTION)
    secs = time.perf_counter() - t0
    ok = misses == 0 and secs < 120
    return ok, (f"default estimator: {misses}/{total} pairs outside tolerance (max err {worst:.3f}); "
                f"root-fraction: {alt[0]}/{alt[1]} (max err {alt[2]:.3f}); {secs:.0f}s")


# 3 ---------------------------------------------------------------------------

def fixed_15_node_graph():
    rng = np.random.default_rng(15)
    nodes = [f"v{i:02d}" for i in range(15)]
    edges = [(a, b) for a, b in itertools.permutations(nodes, 2) if rng.random() < 0.2]
    return SocialGraph(nodes, edges)


def criterion_3(runs=200, mc_runs=1_000_000):
    t0 = time.perf_counter()
    g = fixed_15_node_graph()
    params = RPOParams(0.1, 1.0)
    sigma = {w: float(ic_monte_carlo(g, w, mc_runs, seed=77).sum()) for w in g.nodes}
    top = max(g.nodes, key=lambda w: (sigma[w], w))
    n = len(g)
    lam = params.lam(n)
    need = (1 - lam) * runs - 3 * math.sqrt(runs * lam * (1 - lam))
    good = 0
    for r in range(runs):
        coll, _ = rpo_collection(g, params, seed=r)
        good += informed_range(coll, top) >= (1 - params.epsilon) * sigma[top]
    secs = time.perf_counter() - t0
    ok = good >= need and secs < 300
    return ok, f"{good}/{runs} runs hold (need >= {need:.2f}), sigma({top})={sigma[top]:.3f}, {secs:.0f}s"


# 4 ---------------------------------------------------------------------------

def criterion_4():
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(3, 30))
        pts = np.cumsum(rng.exponential(3.0, size=(n, 2)) * rng.choice([-1, 1], size=(n, 2)), axis=0)
        hist = [HistoryRecord(f"v{i}", tuple(p), i, i) for i, p in enumerate(pts)]
        logs = math.fsum(math.log(d + 1) for d in hop_lengths(hist, PLANAR))
        m = n - 1

        def ll(pi):
            return m * math.log(pi) - (pi + 1) * logs

        worst = max(worst, abs(fit_pareto(hist, PLANAR) - golden_section_max(ll, 1e-9, 1e3)))
    secs = time.perf_counter() - t0
    return worst <= 1e-6 and secs < 5, f"max |closed form - numeric| = {worst:.2e}, {secs:.2f}s"


# 5 ---------------------------------------------------------------------------

def criterion_5():
    rng = np.random.default_rng(5)
    worst = worst_sum = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 11))
        M = rng.random((n, n)) ** 2
        M /= M.sum(axis=1, keepdims=True)
        c = float(rng.uniform(0.05, 0.5))
        p = rwr_stationary(M, c)
        worst = max(worst, float(np.abs(p - rwr_linear_solve(M, c)).max()))
        worst_sum = max(worst_sum, abs(p.sum() - 1))
    return worst <= 1e-8 and worst_sum <= 1e-9, f"max deviation {worst:.2e}, max |sum-1| {worst_sum:.2e}"


# 6 ---------------------------------------------------------------------------

def criterion_6():
    rng = np.random.default_rng(6)
    out_of_range = 0
    for _ in range(10_000):
        k = int(rng.integers(1, 60))
        a = affinity_from_distributions(rng.dirichlet(np.full(k, 0.5)), rng.dirichlet(np.full(k, 0.5)))
        out_of_range += not 0.0 <= a <= 1.0
    masses = []
    for seed in range(5):
        r = np.random.default_rng(seed)
        A = [f"a{i}" for i in range(8)]
        B = [f"b{i}" for i in range(8)]
        docs = [CategoryDocument(f"d{i}", list(r.choice(A if i % 2 == 0 else B, size=400))) for i in range(20)]
        model = train(docs, num_topics=2, seed=seed)
        held = [CategoryDocument(f"h{i}", list(r.choice(A, size=400))) for i in range(5)]
        masses.append(float(np.mean([infer_topics(model, d).max() for d in held])))
    mass = float(np.mean(masses))
    ok = out_of_range == 0 and mass >= 0.9
    return ok, f"{out_of_range} affinities outside [0,1]; planted-topic mass {mass:.3f}"


# 7 ---------------------------------------------------------------------------

def criterion_7():
    errs = [abs(entropy_from_counts([5]))]
    errs += [abs(entropy_from_counts([3] * k) - math.log(k)) for k in range(2, 30)]
    e112 = entropy_from_counts([1, 1, 2])
    ok = max(errs) <= 1e-12 and abs(e112 - 1.0397) <= 1e-4
    return ok, f"max closed-form error {max(errs):.1e}; (1,1,2) -> {e112:.6f}"


# 8 ---------------------------------------------------------------------------

TREND = dict(num_topics=10, lda_iterations=200, infer_sweeps=50)


def trend_suite(seeds=range(10)):
    totals = {}
    for seed in seeds:
        checkins, graph, day = synthetic_world(seed=seed)
        cfg = ExperimentConfig(days=(day,), seed=seed, **TREND)
        for r in run_experiment(cfg, checkins, graph).reports:
            t = totals.setdefault(r.strategy, [0.0, 0.0, 0.0])
            t[0] += r.ai
            t[1] += r.mean_travel_km
            t[2] += r.assigned
    k = len(seeds)
    return {s: (a / k, d / k, n / k) for s, (a, d, n) in totals.items()}


def criterion_8():
    t0 = time.perf_counter()
    m = trend_suite()
    secs = time.perf_counter() - t0
    ai = {s: v[0] for s, v in m.items()}
    travel = {s: v[1] for s, v in m.items()}
    assigned = {s: v[2] for s, v in m.items()}
    checks = {
        "AI(MI)>=AI(IA)": ai["MI"] >= ai["IA"],
        "AI(IA)>=AI(MTA)": ai["IA"] >= ai["MTA"],
        "travel(DIA) smallest": all(travel[DIA] < travel[s] for s in (IA, EIA, MTA)),
        "assigned(MTA)>=assigned(MI)": assigned["MTA"] >= assigned["MI"],
    }
    ok = all(checks.values()) and secs < 180
    failed = [k for k, v in checks.items() if not v]
    detail = " ".join(f"{s}:ai={ai[s]:.4f},km={travel[s]:.2f},n={assigned[s]:.1f}" for s in ("MTA", "MI", "IA", "EIA", "DIA"))
    return ok, f"{detail}; {secs:.0f}s" + (f"; failed {failed}" if failed else "")


# 9 ---------------------------------------------------------------------------

def _cli(args, cwd):
    cmd = [sys.executable, "-m", "crowdinfluence.cli", *args]
    return subprocess.run(cmd, cwd=cwd, capture_output=True, text=True)


def criterion_9(tmp):
    fast = ["--num-topics", "5", "--lda-iterations", "40", "--infer-sweeps", "10"]
    day = "2010-06-15"
    digests = []
    d = os.path.join(tmp, "run")
    for _ in range(2):
        shutil.rmtree(d, ignore_errors=True)
        data = os.path.join(d, "data")
        ds = ["--checkins", os.path.join(data, "checkins.tsv"), "--edges", os.path.join(data, "edges.tsv")]
        steps = [
            ["synth", "--seed", "4", "--workers", "30", "--tasks", "30", "--history-days", "10", "--output-dir", data],
            ["ingest", *ds, "--days", day, "--out", os.path.join(d, "snap.json")],
            ["train-affinity", *ds, "--before", day, *fast, "--out", os.path.join(d, "lda.json")],
            ["fit-mobility", *ds, "--before", day, "--out", os.path.join(d, "mob.json")],
            ["precompute-propagation", *ds, "--out", os.path.join(d, "rrr.npz")],
            ["assign", *ds, "--day", day, "--strategy", "EIA", *fast, "--out", os.path.join(d, "plan.csv")],
            ["experiment", *ds, "--days", day, *fast, "--variants", "IA-WP,IA-AP,IA-AW",
             "--output-dir", os.path.join(d, "exp")],
            ["report", os.path.join(d, "exp", "metrics.csv"), "--out", os.path.join(d, "summary.csv")],
        ]
        for s in steps:
            res = _cli(s, tmp)
            if res.returncode != 0:
                return False, f"{s[0]} exited {res.returncode}: {res.stderr.strip()[:200]}"
        files = {}
        for root, _, names in os.walk(d):
            for nm in names:
                p = os.path.join(root, nm)
                with open(p, "rb") as fh:
                    files[os.path.relpath(p, d)] = fh.read()
        digests.append(files)
    a, b = digests
    differ = sorted(k for k in a if a[k] != b.get(k))
    ok = not differ and a.keys() == b.keys()
    return ok, f"{len(a)} output files from 8 subcommands compared" + (f"; differing: {differ}" if differ else
                                                                     ", all byte-identical")


# 10 --------------------------------------------------------------------------

def criterion_10():
    rng = np.random.default_rng(10)
    bad = 0
    for _ in range(1000):
        inf = float(rng.exponential(5))
        r = float(rng.uniform(0.1, 50))
        d = r * float(rng.uniform(1, 5))
        bad += edge_cost(DIA, inf, 0.0, d, r) != 1.0
        bad += edge_cost(EIA, inf, 0.0) != edge_cost(IA, inf)
    bad += edge_cost(IA, 0.0) != 1.0
    bad += edge_cost(DIA, 7.0, 0.0, 3.0, 3.0) != 1.0
    return bad == 0, f"{bad} boundary violations over 2002 exact checks"


# pytest ------------------------------------------------------------------------

NAMES = {1: "MCMF optimality", 2: "pairwise propagation", 3: "informed-range guarantee", 4: "Pareto MLE",
         5: "RWR stationary", 6: "affinity bounds/recovery", 7: "entropy closed forms", 8: "trend suite",
         9: "determinism", 10: "boundary formulas"}


def _check(num, fn, *args):
    ok, detail = fn(*args)
    record(num, NAMES[num], ok, detail)
    assert ok, detail


def test_criterion_01_mcmf_optimality():
    _check(1, criterion_1)


@pytest.mark.slow
def test_criterion_02_pairwise_propagation():
    _check(2, criterion_2)


@pytest.mark.slow
def test_criterion_03_informed_range_guarantee():
    _check(3, criterion_3)


def test_criterion_04_pareto_mle():
    _check(4, criterion_4)


def test_criterion_05_rwr_stationary():
    _check(5, criterion_5)


def test_criterion_06_affinity():
    _check(6, criterion_6)


def test_criterion_07_entropy():
    _check(7, criterion_7)


@pytest.mark.slow
def test_criterion_08_trend_suite():
    _check(8, criterion_8)


def test_criterion_09_determinism(tmp_path):
    _check(9, criterion_9, str(tmp_path))


def test_criterion_10_boundary_formulas():
    _check(10, criterion_10)


if __name__ == "__main__":
    import tempfile
    with tempfile.TemporaryDirectory() as tmp:
        table = [(1, criterion_1, ()), (2, criterion_2, ()), (3, criterion_3, ()), (4, criterion_4, ()),
                 (5, criterion_5, ()), (6, criterion_6, ()), (7, criterion_7, ()), (8, criterion_8, ()),
                 (9, criterion_9, (tmp,)), (10, criterion_10, ())]
        results = [record(n, NAMES[n], *fn(*a)) for n, fn, a in table]
    sys.exit(0 if all(results) else 1)
