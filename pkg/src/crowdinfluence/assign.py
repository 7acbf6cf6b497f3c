"""Task assignment as min-cost max-flow, plus the two baselines.

The flow network has a source, one node per worker, one per task and a sink.
Source->worker, worker->task (eligible pairs only) and task->sink arcs all
have capacity 1. Strategies differ only in the worker->task arc cost.
"""
from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field

from .errors import DomainError
from .model import HAVERSINE, eligible_pairs

MTA, MI, IA, EIA, DIA = "MTA", "MI", "IA", "EIA", "DIA"
STRATEGIES = (MTA, MI, IA, EIA, DIA)
FLOW_STRATEGIES = (MTA, IA, EIA, DIA)
PLAN_HEADER = ["instant", "task_id", "worker_id", "strategy", "cost", "influence", "distance_km"]


def edge_cost(strategy: str, influence: float = 0.0, entropy: float = 0.0,
              distance_km: float = 0.0, reach_radius: float = math.inf) -> float:
    """Worker->task arc cost.

    IA ``1/(if+1)``; EIA ``(e+1)/(if+1)``; DIA ``1/(F*if+1)`` with the
    distance discount ``F = 1 - min(1, d/r)``; MTA 0.
    """
    if influence < 0 or entropy < 0 or distance_km < 0:
        raise DomainError("influence, entropy and distance must be nonnegative")
    if strategy == IA:
        return 1.0 / (influence + 1.0)
    if strategy == EIA:
        return (entropy + 1.0) / (influence + 1.0)
    if strategy == DIA:
        f = 1.0 - min(1.0, distance_km / reach_radius)
        return 1.0 / (f * influence + 1.0)
    if strategy == MTA:
        return 0.0
    raise DomainError(f"unknown strategy {strategy!r}")


@dataclass
class FlowNetwork:
    """Bipartite unit-capacity network.

    Node 0 is the source, ``1..W`` the workers, ``W+1..W+S`` the tasks and
    ``W+S+1`` the sink.
    """

    workers: list
    tasks: list
    arcs: list = field(default_factory=list)  # (worker index, task index, cost)

    @property
    def n_nodes(self) -> int:
        return len(self.workers) + len(self.tasks) + 2

    @property
    def n_arcs(self) -> int:
        return len(self.workers) + len(self.tasks) + len(self.arcs)

    @classmethod
    def from_costs(cls, costs):
        """Build from a mapping ``(worker_id, task_id) -> cost``."""
        workers = sorted({w for w, _ in costs})
        tasks = sorted({s for _, s in costs})
        wi = {w: i for i, w in enumerate(workers)}
        ti = {s: j for j, s in enumerate(tasks)}
        arcs = sorted((wi[w], ti[s], float(c)) for (w, s), c in costs.items())
        return cls(workers, tasks, arcs)


def solve_mcmf(network: FlowNetwork):
    """Maximum flow of minimum cost by successive shortest paths.

    Dijkstra on reduced costs with node potentials; ties are broken by node
    index. Returns ``(matches, total_cost)`` with matches a sorted list of
    ``(worker_index, task_index, cost)``.
    """
    W, S = len(network.workers), len(network.tasks)
    n = W + S + 2
    src, snk = 0, n - 1
    # residual graph as parallel lists: to, cap, cost, rev
    to, cap, cost, rev = [], [], [], []
    adj = [[] for _ in range(n)]

    def add(u, v, c):
        adj[u].append(len(to))
        to.append(v); cap.append(1); cost.append(c); rev.append(len(to))
        adj[v].append(len(to))
        to.append(u); cap.append(0); cost.append(-c); rev.append(len(to) - 2)

    for i in range(W):
        add(src, 1 + i, 0.0)
    for i, j, c in network.arcs:
        if c < 0:
            raise DomainError("negative arc cost")
        add(1 + i, 1 + W + j, c)
    for j in range(S):
        add(1 + W + j, snk, 0.0)

    pot = [0.0] * n
    inf = math.inf
    while True:
        dist = [inf] * n
        parent = [-1] * n
        dist[src] = 0.0
        heap = [(0.0, src)]
        done = [False] * n
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for e in adj[u]:
                if cap[e] <= 0:
                    continue
                v = to[e]
                if done[v]:
                    continue
                rc = cost[e] + pot[u] - pot[v]
                nd = d + (rc if rc > 0.0 else 0.0)
                if nd < dist[v]:
                    dist[v] = nd
                    parent[v] = e
                    heapq.heappush(heap, (nd, v))
        if dist[snk] == inf:
            break
        for v in range(n):
            if dist[v] < inf:
                pot[v] += dist[v]
        v = snk
        while v != src:
            e = parent[v]
            cap[e] -= 1
            cap[rev[e]] += 1
            v = to[rev[e]]

    matches = []
    for i in range(W):
        for e in adj[1 + i]:
            v = to[e]
            if e % 2 == 0 and 1 + W <= v <= W + S and cap[e] == 0:
                matches.append((i, v - 1 - W, cost[e]))
    matches.sort()
    return matches, math.fsum(c for _, _, c in matches)


@dataclass(frozen=True)
class PlanPair:
    task_id: str
    worker_id: str
    cost: float
    influence: float
    distance_km: float


@dataclass
class AssignmentPlan:
    strategy: str
    pairs: list = field(default_factory=list)

    @property
    def cardinality(self) -> int:
        return len(self.pairs)

    @property
    def total_cost(self) -> float:
        return math.fsum(p.cost for p in self.pairs)

    def check(self):
        ws = [p.worker_id for p in self.pairs]
        ts = [p.task_id for p in self.pairs]
        if len(set(ws)) != len(ws) or len(set(ts)) != len(ts):
            raise DomainError("plan is not a matching")
        return self


def _value(influence, key):
    if influence is None:
        return 0.0
    v = influence.get(key, 0.0)
    return float(getattr(v, "value", v))


def pair_costs(strategy, pairs, influence=None, entropy=None, radius=None) -> dict:
    """Arc cost for each CandidatePair under ``strategy``."""
    costs = {}
    for p in pairs:
        key = (p.worker_id, p.task_id)
        r = math.inf if radius is None else radius[p.worker_id]
        e = 0.0 if entropy is None else float(getattr(entropy.get(p.task_id, 0.0), "entropy",
                                                      entropy.get(p.task_id, 0.0)))
        costs[key] = edge_cost(strategy, _value(influence, key), e, p.distance_km, r)
    return costs


def assign_pairs(strategy, pairs, influence=None, entropy=None, radius=None) -> AssignmentPlan:
    """Solve one instance given its eligible pairs.

    ``influence`` maps (worker, task) to a number or InfluenceScore;
    ``entropy`` maps task id to a number or LocationEntropy; ``radius`` maps
    worker id to reach radius (needed by DIA).
    """
    pairs = list(pairs)
    dist = {(p.worker_id, p.task_id): p.distance_km for p in pairs}
    if strategy == MI:
        return _greedy_influence(pairs, influence, dist)
    if strategy not in FLOW_STRATEGIES:
        raise DomainError(f"unknown strategy {strategy!r}")
    if strategy == DIA and radius is None:
        raise DomainError("DIA needs worker reach radii")
    costs = pair_costs(strategy, pairs, influence, entropy, radius)
    if not costs:
        return AssignmentPlan(strategy)
    net = FlowNetwork.from_costs(costs)
    matches, _ = solve_mcmf(net)
    plan = AssignmentPlan(strategy)
    for i, j, c in matches:
        key = (net.workers[i], net.tasks[j])
        plan.pairs.append(PlanPair(key[1], key[0], c, _value(influence, key), dist[key]))
    return plan.check()


def _greedy_influence(pairs, influence, dist) -> AssignmentPlan:
    order = sorted(pairs, key=lambda p: (-_value(influence, (p.worker_id, p.task_id)), p.worker_id, p.task_id))
    used_w, used_t = set(), set()
    plan = AssignmentPlan(MI)
    for p in order:
        if p.worker_id in used_w or p.task_id in used_t:
            continue
        used_w.add(p.worker_id)
        used_t.add(p.task_id)
        key = (p.worker_id, p.task_id)
        plan.pairs.append(PlanPair(p.task_id, p.worker_id, 0.0, _value(influence, key), dist[key]))
    plan.pairs.sort(key=lambda q: (q.worker_id, q.task_id))
    return plan


def assign(strategy, snapshot, influence=None, entropy=None, metric=HAVERSINE) -> AssignmentPlan:
    """Eligible pairs of ``snapshot`` solved under ``strategy``."""
    pairs = eligible_pairs(snapshot, metric)
    radius = {w.id: w.reach_radius for w in snapshot.workers}
    return assign_pairs(strategy, pairs, influence, entropy, radius)


def assign_mta(snapshot, metric=HAVERSINE):
    return assign(MTA, snapshot, metric=metric)


def assign_ia(snapshot, influence, entropy=None, metric=HAVERSINE):
    return assign(IA, snapshot, influence, entropy, metric)


def assign_eia(snapshot, influence, entropy, metric=HAVERSINE):
    return assign(EIA, snapshot, influence, entropy, metric)


def assign_dia(snapshot, influence, entropy=None, metric=HAVERSINE):
    return assign(DIA, snapshot, influence, entropy, metric)


def assign_mi(snapshot, influence, metric=HAVERSINE):
    return assign(MI, snapshot, influence, metric=metric)


def write_plan(path_or_fh, instant, plan: AssignmentPlan, header=True, comment=None):
    """Append plan rows as CSV (``instant, task_id, worker_id, strategy, cost, influence, distance_km``)."""
    own = isinstance(path_or_fh, (str, bytes)) or hasattr(path_or_fh, "__fspath__")
    fh = open(path_or_fh, "w", newline="", encoding="utf-8") if own else path_or_fh
    try:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(PLAN_HEADER)
        for p in plan.pairs:
            w.writerow([instant, p.task_id, p.worker_id, plan.strategy, repr(p.cost), repr(p.influence),
                        repr(p.distance_km)])
    finally:
        if own:
            fh.close()
