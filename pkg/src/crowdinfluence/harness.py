"""End-to-end experiments: models, per-instance assignment and metrics.

Models (topic model, mobility, RRR collection) are fitted once from the
check-ins before the earliest experiment day and shared by every strategy,
day and grid point. Each (day, strategy) run walks the day's instances in
time order; a worker who receives a task is not offered again that day, and
unassigned tasks that are still live carry over to the next instance.
"""
from __future__ import annotations

import contextlib
import csv
import dataclasses
import datetime as dt
import itertools
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from ._backend import NAME as BACKEND_NAME
from .affinity import CategoryDocument, affinity, build_documents, train
from .assign import DIA, EIA, IA, MI, MTA, STRATEGIES, assign_pairs, write_plan
from .errors import ConfigError, CrowdInfluenceError, DataError
from .influence import COMPONENTS, LocationEntropy, entropy_from_counts, score_pairs
from .ingest import UNDIRECTED, build_histories, build_snapshots, day_start, load_checkins, load_social_graph
from .mobility import DEFAULT_PI_MAX, DEFAULT_RESTART, SAME_PLACE_KM, fit_mobility, willingness
from .model import HAVERSINE, Snapshot, canonical_metric, distance, eligible_pairs
from .propagation import ESTIMATORS, SCALED, RPOParams, propagation_matrix, rpo_collection

log = logging.getLogger(__name__)

VARIANTS = {"IA-WP": ("affinity",), "IA-AP": ("willingness",), "IA-AW": ("propagation",)}
METRICS_HEADER = ["day", "strategy", "assigned", "ai", "ap", "mean_travel_km", "solve_seconds", "seed"]
INSTANCE_HEADER = ["day", "instance", "instant", "strategy", "assigned", "ai", "ai_undefined", "ap",
                   "mean_travel_km", "solve_seconds", "seed"]
SUMMARY_HEADER = ["strategy", "days", "assigned", "ai", "ap", "mean_travel_km", "solve_seconds", "seed"]
GRID_FIELDS = ("num_tasks", "num_workers", "valid_hours", "reach_radius")


@dataclass
class ExperimentConfig:
    checkins: str | None = None
    edges: str | None = None
    directedness: str = UNDIRECTED
    days: tuple = ()
    strategies: tuple = STRATEGIES
    variants: tuple = ()
    disabled: tuple = ()
    num_tasks: int = 1500
    num_workers: int = 1200
    valid_hours: float = 5.0
    reach_radius: float = 25.0
    speed: float = 5.0
    granularity: int = 86400
    epsilon: float = 0.1
    o: float = 1.0
    estimator: str = SCALED
    num_topics: int = 50
    lda_iterations: int = 1000
    infer_sweeps: int = 100
    restart: float = DEFAULT_RESTART
    pi_max: float = DEFAULT_PI_MAX
    colocation_radius: float = SAME_PLACE_KM
    metric: str = HAVERSINE
    seed: int = 0
    output_dir: str | None = None
    timing: bool = False
    grid: dict = field(default_factory=dict)

    def __post_init__(self):
        self.days = tuple(d if isinstance(d, dt.date) else dt.date.fromisoformat(str(d)) for d in self.days)
        self.strategies = tuple(self.strategies)
        self.variants = tuple(self.variants)
        self.disabled = tuple(sorted(set(self.disabled)))
        self.validate()

    def validate(self):
        bad = [s for s in self.strategies if s not in STRATEGIES]
        if bad:
            raise ConfigError(f"unknown strategies {bad}")
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad:
            raise ConfigError(f"unknown ablation variants {bad}")
        bad = [c for c in self.disabled if c not in COMPONENTS]
        if bad:
            raise ConfigError(f"unknown influence components {bad}")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        try:
            self.metric = canonical_metric(self.metric)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for name in ("num_tasks", "num_workers", "granularity", "num_topics", "lda_iterations", "infer_sweeps"):
            if int(getattr(self, name)) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("valid_hours", "reach_radius", "speed", "epsilon", "o", "pi_max"):
            if not float(getattr(self, name)) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 <= self.restart < 1.0:
            raise ConfigError("restart must lie in [0, 1)")
        for k, values in self.grid.items():
            if k not in GRID_FIELDS:
                raise ConfigError(f"grid field {k!r} not in {GRID_FIELDS}")
            if not values:
                raise ConfigError(f"grid field {k!r} has no values")

    @property
    def labels(self):
        """Run labels: the plain strategies then the ablation variants."""
        return self.strategies + self.variants

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["days"] = [x.isoformat() for x in self.days]
        d["strategies"] = list(self.strategies)
        d["variants"] = list(self.variants)
        d["disabled"] = list(self.disabled)
        return d


def expand_grid(config: ExperimentConfig) -> list:
    """One config per point of the parameter grid (just ``config`` if there is none)."""
    if not config.grid:
        return [config]
    keys = sorted(config.grid)
    out = []
    for combo in itertools.product(*(config.grid[k] for k in keys)):
        out.append(dataclasses.replace(config, grid={}, **dict(zip(keys, combo))))
    return out


@dataclass
class MetricsReport:
    day: str
    strategy: str
    assigned: int
    ai: float
    ap: float
    mean_travel_km: float
    solve_seconds: float
    seed: int
    instance: int | None = None
    instant: int | None = None
    ai_undefined: bool = False


def _score(v):
    return float(getattr(v, "value", v))


def metric_ai(plan, influence_scores) -> float:
    """Mean influence over the plan's pairs; 0 for an empty plan."""
    if not plan.pairs:
        log.debug("AI undefined for an empty plan, reported as 0")
        return 0.0
    return math.fsum(_score(influence_scores[(p.worker_id, p.task_id)]) for p in plan.pairs) / len(plan.pairs)


def metric_ap(plan, propagation_tables) -> float:
    """Mean over assigned pairs of the worker's outward informed probability.

    ``propagation_tables`` maps worker id to a PropagationTable or directly
    to its outward sum. Workers missing from the mapping contribute 0.
    """
    if not plan.pairs:
        return 0.0
    total = []
    for p in plan.pairs:
        t = propagation_tables.get(p.worker_id, 0.0)
        total.append(t.outward_sum() if hasattr(t, "outward_sum") else float(t))
    return math.fsum(total) / len(plan.pairs)


def mean_travel(plan) -> float:
    if not plan.pairs:
        return 0.0
    return math.fsum(p.distance_km for p in plan.pairs) / len(plan.pairs)


@contextlib.contextmanager
def stage(name, instance=None):
    """Re-raise package errors tagged with the failing stage and instance."""
    try:
        yield
    except CrowdInfluenceError as exc:
        where = name if instance is None else f"{name} instance {instance}"
        raise type(exc)(f"[{where}] {exc}") from exc


class ModelContext:
    """Everything fitted once per dataset and reused by all instances."""

    def __init__(self, config: ExperimentConfig, checkins, graph, before: int,
                 topic_model=None, mobility=None, collection=None):
        self.config = config
        self.graph = graph
        self.node_index = dict(graph.index)
        with stage("histories"):
            self.histories = build_histories(checkins, before)
        with stage("train-affinity"):
            docs, _ = build_documents(self.histories)
            self.worker_docs = docs
            if topic_model is None:
                if not docs:
                    raise DataError("no categorised history to train the topic model on")
                topic_model = train([docs[w] for w in sorted(docs)], num_topics=config.num_topics,
                                    iterations=config.lda_iterations, seed=config.seed,
                                    infer_sweeps=config.infer_sweeps)
            self.topic_model = topic_model
        with stage("fit-mobility"):
            mobility = dict(mobility or {})
            for w, h in sorted(self.histories.items()):
                if h and w not in mobility:
                    mobility[w] = fit_mobility(w, h, config.metric, config.restart, config.pi_max)
            self.mobility = mobility
        with stage("precompute-propagation"):
            if collection is None:
                params = RPOParams(config.epsilon, config.o)
                collection, self.trace = rpo_collection(graph, params, seed=config.seed)
            else:
                if list(collection.nodes) != list(graph.nodes):
                    raise DataError("cached RRR collection covers a different node set")
                self.trace = None
            self.collection = collection
            P = propagation_matrix(collection, config.estimator)
            P.data = np.clip(P.data, 0.0, 1.0)
            self.propagation = P
            self.outward = np.asarray(P.sum(axis=1)).ravel()
        self._visits = self._visit_index()
        self._willingness = {}
        self._entropy = {}
        self._affinity = {}

    def _visit_index(self):
        """Visitor counts per distinct (exact) history location."""
        at = {}
        for w, recs in self.histories.items():
            for r in recs:
                c = at.setdefault(tuple(r.location), {})
                c[w] = c.get(w, 0) + 1
        return sorted(at.items())

    def entropy(self, task) -> LocationEntropy:
        if task.id not in self._entropy:
            counts = {}
            for loc, c in self._visits:
                if distance(loc, task.location, self.config.metric) <= self.config.colocation_radius:
                    for w, k in c.items():
                        counts[w] = counts.get(w, 0) + k
            self._entropy[task.id] = LocationEntropy(task.id, entropy_from_counts(counts.values()), counts)
        return self._entropy[task.id]

    def willingness_vector(self, task) -> np.ndarray:
        if task.id not in self._willingness:
            vec = np.zeros(len(self.graph.nodes))
            for w, i in self.node_index.items():
                m = self.mobility.get(w)
                if m is not None:
                    vec[i] = willingness(m, task.location, self.config.metric)
            self._willingness[task.id] = vec
        return self._willingness[task.id]

    def affinity(self, worker_id, task) -> float:
        key = (worker_id, task.id)
        if key not in self._affinity:
            tdoc = CategoryDocument(task.id, sorted(task.categories))
            self._affinity[key] = affinity(self.topic_model, self.worker_docs.get(worker_id), tdoc)
        return self._affinity[key]

    def influence(self, pairs, tasks, disabled=()):
        tmap = {s.id: s for s in tasks}
        aff = {(p.worker_id, p.task_id): self.affinity(p.worker_id, tmap[p.task_id]) for p in pairs}
        wil = {} if "willingness" in disabled else {s: self.willingness_vector(tmap[s]) for s in
                                                    sorted({p.task_id for p in pairs})}
        return score_pairs(pairs, aff, wil, self.propagation, self.node_index, disabled)

    def outward_sums(self, worker_ids):
        return {w: float(self.outward[self.node_index[w]]) if w in self.node_index else 0.0 for w in worker_ids}


def sample_snapshot(snapshot: Snapshot, num_tasks, num_workers, seed, day, index) -> Snapshot:
    """Random |S| tasks and |W| workers drawn under a seed tied to (seed, day, instance)."""
    rng = np.random.default_rng([int(seed), day.toordinal(), int(index)])

    def pick(items, k):
        items = sorted(items, key=lambda x: x.id)
        if len(items) <= k:
            return items
        keep = np.sort(rng.choice(len(items), size=k, replace=False))
        return [items[i] for i in keep]

    tasks = pick(snapshot.tasks, num_tasks)
    workers = pick(snapshot.workers, num_workers)
    return Snapshot(snapshot.instant, workers, tasks)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    reports: list
    instances: list
    plans: dict
    trace: object = None

    def summary(self):
        return summarize(self.reports)


def _run_label(label, instances, ctx, config, day):
    """One strategy (or ablation variant) over the instances of one day."""
    strategy = IA if label in VARIANTS else label
    disabled = tuple(sorted(set(config.disabled) | set(VARIANTS.get(label, ()))))
    taken = set()
    carry = []
    rows, plans = [], []
    for idx, snap in enumerate(instances):
        with stage(f"assign:{label}", f"{day.isoformat()}#{idx}"):
            tasks = sorted({s.id: s for s in carry + list(snap.tasks) if s.deadline > snap.instant}.values(),
                           key=lambda s: s.id)
            workers = [w for w in snap.workers if w.id not in taken]
            inst = Snapshot(snap.instant, workers, tasks)
            pairs = eligible_pairs(inst, config.metric)
            full = ctx.influence(pairs, tasks, config.disabled)
            used = full if disabled == config.disabled else ctx.influence(pairs, tasks, disabled)
            entropy = {s.id: ctx.entropy(s) for s in tasks} if strategy == EIA else None
            radius = {w.id: w.reach_radius for w in workers}
            t0 = time.perf_counter()
            plan = assign_pairs(strategy, pairs, used, entropy, radius)
            elapsed = time.perf_counter() - t0 if config.timing else math.nan
            plan.strategy = label
            # report the full influence even for ablation variants
            plan.pairs = [dataclasses.replace(p, influence=_score(full[(p.worker_id, p.task_id)]))
                          for p in plan.pairs]
            taken |= {p.worker_id for p in plan.pairs}
            done = {p.task_id for p in plan.pairs}
            carry = [s for s in tasks if s.id not in done]
            rows.append(MetricsReport(day.isoformat(), label, plan.cardinality, metric_ai(plan, full),
                                      metric_ap(plan, ctx.outward_sums(p.worker_id for p in plan.pairs)),
                                      mean_travel(plan), elapsed, config.seed, idx, snap.instant,
                                      plan.cardinality == 0))
            plans.append((snap.instant, plan))
    return rows, plans


def aggregate_day(rows) -> MetricsReport:
    """Combine one day's instances: counts add up, means are pair-weighted."""
    n = sum(r.assigned for r in rows)
    first = rows[0]

    def wmean(attr):
        return math.fsum(getattr(r, attr) * r.assigned for r in rows) / n if n else 0.0

    secs = math.fsum(r.solve_seconds for r in rows)
    return MetricsReport(first.day, first.strategy, n, wmean("ai"), wmean("ap"), wmean("mean_travel_km"),
                         secs, first.seed, ai_undefined=n == 0)


def summarize(reports) -> list:
    """Per-strategy averages over days, in first-seen strategy order."""
    order, by = [], {}
    for r in reports:
        if r.strategy not in by:
            order.append(r.strategy)
            by[r.strategy] = []
        by[r.strategy].append(r)
    out = []
    for s in order:
        rs = by[s]
        k = len(rs)
        out.append({
            "strategy": s, "days": k,
            "assigned": math.fsum(r.assigned for r in rs) / k,
            "ai": math.fsum(r.ai for r in rs) / k,
            "ap": math.fsum(r.ap for r in rs) / k,
            "mean_travel_km": math.fsum(r.mean_travel_km for r in rs) / k,
            "solve_seconds": math.fsum(r.solve_seconds for r in rs) / k,
            "seed": rs[0].seed,
        })
    return out


def load_dataset(config: ExperimentConfig):
    if not config.checkins or not config.edges:
        raise ConfigError("both checkins and edges paths are required")
    with stage("ingest"):
        checkins = load_checkins(config.checkins)
        users = sorted({c.user_id for c in checkins})
        graph = load_social_graph(config.edges, config.directedness, nodes=users)
    return checkins, graph


def run_experiment(config: ExperimentConfig, checkins=None, graph=None, context=None) -> ExperimentResult:
    """Run every (day, strategy) pair and, if ``output_dir`` is set, write the CSV artifacts."""
    if checkins is None or graph is None:
        checkins, graph = load_dataset(config)
    days = sorted(config.days)
    if not days:
        raise ConfigError("no experiment days given")
    if context is None:
        context = ModelContext(config, checkins, graph, day_start(days[0]))
    reports, instance_rows, plans = [], [], {}
    for day in days:
        with stage("snapshots", day.isoformat()):
            snaps, _ = build_snapshots(checkins, day, config.granularity, int(round(config.valid_hours * 3600)),
                                       config.reach_radius, config.speed)
        if not snaps:
            log.warning("%s: no check-ins, day skipped", day)
        instances = [sample_snapshot(snap, config.num_tasks, config.num_workers, config.seed, day, idx)
                     for idx, snap in enumerate(snaps)]
        for label in config.labels:
            if not instances:
                continue
            rows, day_plans = _run_label(label, instances, context, config, day)
            instance_rows.extend(rows)
            reports.append(aggregate_day(rows))
            plans[(day.isoformat(), label)] = day_plans
    result = ExperimentResult(config, reports, instance_rows, plans, context.trace)
    if config.output_dir:
        write_outputs(result, config.output_dir)
    return result


def run_grid(config: ExperimentConfig, checkins=None, graph=None) -> list:
    """Run each grid point into ``output_dir/point-NN``; models are shared."""
    if checkins is None or graph is None:
        checkins, graph = load_dataset(config)
    points = expand_grid(config)
    if len(points) == 1:
        return [run_experiment(config, checkins, graph)]
    ctx = ModelContext(config, checkins, graph, day_start(min(config.days)))
    out = []
    for i, pc in enumerate(points):
        if config.output_dir:
            pc = dataclasses.replace(pc, output_dir=os.path.join(config.output_dir, f"point-{i:02d}"))
        out.append(run_experiment(pc, checkins, graph, ctx))
    return out


def fmt(x):
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_metrics(path, reports, header=METRICS_HEADER):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in reports:
            d = r if isinstance(r, dict) else dataclasses.asdict(r)
            w.writerow([fmt(d[k]) for k in header])


def read_metrics(path) -> list:
    """Rows of a metrics CSV with numeric columns parsed."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    ints = {"assigned", "seed", "instance", "instant", "days", "ai_undefined"}
    for r in rows:
        for k, v in r.items():
            if k in ints:
                r[k] = int(v)
            elif k not in ("day", "strategy"):
                r[k] = float(v)
    return rows


def write_outputs(result: ExperimentResult, outdir):
    cfg = result.config
    os.makedirs(outdir, exist_ok=True)
    write_metrics(os.path.join(outdir, "metrics.csv"), result.reports)
    write_metrics(os.path.join(outdir, "instances.csv"), result.instances, INSTANCE_HEADER)
    write_metrics(os.path.join(outdir, "summary.csv"), summarize(result.reports), SUMMARY_HEADER)
    with open(os.path.join(outdir, "plans.csv"), "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# seed={cfg.seed}\n")
        first = True
        for (day, label) in sorted(result.plans):
            for instant, plan in result.plans[(day, label)]:
                write_plan(fh, instant, plan, header=first)
                first = False
    trace = dataclasses.asdict(result.trace) if result.trace is not None else None
    meta = {
        "version": __version__,
        "backend": BACKEND_NAME,
        "seed": cfg.seed,
        "config": {k: v for k, v in cfg.to_dict().items() if k != "output_dir"},
        "rpo": trace,
        "ablation": {"rule": "disabled components are replaced by the constant 1",
                     "variants": {k: list(v) for k, v in VARIANTS.items() if k in cfg.variants},
                     "disabled": list(cfg.disabled)},
        "timing": "measured" if cfg.timing else "disabled (solve_seconds is nan)",
    }
    with open(os.path.join(outdir, "run.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def report(paths, out=None) -> list:
    """Average several metrics.csv files per strategy."""
    reports = []
    for p in paths:
        try:
            rows = read_metrics(p)
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(f"cannot read metrics {p}: {exc}") from exc
        for r in rows:
            reports.append(MetricsReport(**{k: r[k] for k in METRICS_HEADER}))
    summary = summarize(reports)
    if out is not None:
        write_metrics(out, summary, SUMMARY_HEADER)
    return summary


__all__ = [
    "DIA", "EIA", "IA", "MI", "MTA", "VARIANTS", "ExperimentConfig", "ExperimentResult", "MetricsReport",
    "ModelContext", "expand_grid", "metric_ai", "metric_ap", "report", "run_experiment", "run_grid",
    "sample_snapshot", "summarize",
]
