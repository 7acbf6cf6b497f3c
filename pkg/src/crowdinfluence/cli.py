"""Command line: ``crowdinfluence <subcommand> [flags]``.

Any flag may also come from a flat ``key = value`` file given with
``--config``; flags on the command line win. Exit status is 0 on success,
2 for configuration errors, 3 for bad input data and 4 for internal
invariant violations.
"""
from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import os
import sys

from . import __version__
from .errors import ConfigError, DataError, DomainError, InvariantError

log = logging.getLogger("crowdinfluence")

EXIT_CONFIG, EXIT_DATA, EXIT_INVARIANT = 2, 3, 4


def _list(text):
    return tuple(x.strip() for x in str(text).split(",") if x.strip())


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off", ""):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _date(text):
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a YYYY-MM-DD date: {text!r}") from None


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; dashes and underscores are interchangeable."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for no, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{no}: expected key = value")
                k, v = line.split("=", 1)
                out[k.strip().replace("-", "_")] = v.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return out


def _dataset(p, days=True):
    p.add_argument("--checkins", help="check-in TSV")
    p.add_argument("--edges", help="friendship edge list")
    p.add_argument("--directedness", default="undirected-as-bidirectional",
                   choices=["undirected-as-bidirectional", "directed"])
    p.add_argument("--metric", default="haversine", choices=["haversine", "planar-euclidean"])
    p.add_argument("--seed", type=int, default=0)
    if days:
        p.add_argument("--days", type=_list, default=(), help="comma-separated YYYY-MM-DD list")


def _instances(p):
    p.add_argument("--granularity", type=int, default=86400, help="seconds per time instance")
    p.add_argument("--valid-hours", type=float, default=5.0)
    p.add_argument("--reach-radius", type=float, default=25.0)
    p.add_argument("--speed", type=float, default=5.0)
    p.add_argument("--num-tasks", type=int, default=1500)
    p.add_argument("--num-workers", type=int, default=1200)


def _models(p):
    p.add_argument("--num-topics", type=int, default=50)
    p.add_argument("--lda-iterations", type=int, default=1000)
    p.add_argument("--infer-sweeps", type=int, default=100)
    p.add_argument("--restart", type=float, default=0.15)
    p.add_argument("--pi-max", type=float, default=10.0)
    p.add_argument("--colocation-radius", type=float, default=0.001)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--o", type=float, default=1.0)
    p.add_argument("--estimator", default="scaled", choices=["scaled", "root-fraction"])


def build_parser():
    top = argparse.ArgumentParser(prog="crowdinfluence", description=__doc__.splitlines()[0])
    top.add_argument("--version", action="version", version=__version__)
    top.add_argument("-v", "--verbose", action="count", default=0)
    sub = top.add_subparsers(dest="command", required=True)

    top.subcommands = {}

    def cmd(name, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="flat key = value file supplying defaults")
        top.subcommands[name] = p
        return p

    p = cmd("ingest", "validate inputs and cache the daily snapshots")
    _dataset(p)
    _instances(p)
    p.add_argument("--out", required=True, help="snapshot JSON")

    p = cmd("train-affinity", "train the topic model on history before a day")
    _dataset(p, days=False)
    p.add_argument("--before", type=_date, required=True)
    p.add_argument("--num-topics", type=int, default=50)
    p.add_argument("--lda-iterations", type=int, default=1000)
    p.add_argument("--infer-sweeps", type=int, default=100)
    p.add_argument("--out", required=True)

    p = cmd("fit-mobility", "fit per-worker mobility models on history before a day")
    _dataset(p, days=False)
    p.add_argument("--before", type=_date, required=True)
    p.add_argument("--restart", type=float, default=0.15)
    p.add_argument("--pi-max", type=float, default=10.0)
    p.add_argument("--out", required=True)

    p = cmd("precompute-propagation", "draw and cache the RRR collection")
    _dataset(p, days=False)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--o", type=float, default=1.0)
    p.add_argument("--out", required=True)

    p = cmd("assign", "solve one instance with one strategy")
    _dataset(p, days=False)
    _instances(p)
    _models(p)
    p.add_argument("--day", type=_date, required=True)
    p.add_argument("--instance", type=int, default=0, help="index of the time instance within the day")
    p.add_argument("--strategy", default="IA", choices=["MTA", "MI", "IA", "EIA", "DIA"])
    p.add_argument("--disabled", type=_list, default=(), help="influence components set to 1")
    p.add_argument("--affinity-model", help="topic model from train-affinity")
    p.add_argument("--mobility-cache", help="models from fit-mobility")
    p.add_argument("--propagation-cache", help="collection from precompute-propagation")
    p.add_argument("--out", required=True, help="plan CSV")

    p = cmd("experiment", "run every day x strategy and write metrics")
    _dataset(p)
    _instances(p)
    _models(p)
    p.add_argument("--strategies", type=_list, default=("MTA", "MI", "IA", "EIA", "DIA"))
    p.add_argument("--variants", type=_list, default=(), help="ablations among IA-WP, IA-AP, IA-AW")
    p.add_argument("--disabled", type=_list, default=(), help="influence components set to 1")
    p.add_argument("--grid", action="append", default=[], metavar="FIELD=V1,V2",
                   help="sweep num_tasks, num_workers, valid_hours or reach_radius")
    p.add_argument("--timing", type=_bool, nargs="?", const=True, default=False,
                   help="record solve wall time (otherwise nan, keeping outputs reproducible)")
    p.add_argument("--output-dir", required=True)

    p = cmd("report", "average metrics.csv files per strategy")
    p.add_argument("metrics", nargs="+")
    p.add_argument("--out", help="summary CSV (default: stdout)")

    p = cmd("synth", "write a seeded synthetic dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=50)
    p.add_argument("--tasks", type=int, default=60)
    p.add_argument("--history-days", type=int, default=20)
    p.add_argument("--output-dir", required=True)
    return top


def _config_path(argv):
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _apply_config(sub, values, path):
    by_dest = {a.dest: a for a in sub._actions if a.option_strings and a.dest not in ("help", "config")}
    unknown = sorted(set(values) - set(by_dest))
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    for dest, raw in values.items():
        action = by_dest[dest]
        try:
            if dest == "grid":
                value = [g for g in raw.split(";") if g.strip()]
            elif action.type is not None:
                value = action.type(raw)
            else:
                value = raw
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"{path}: bad value for {dest}: {exc}") from None
        if action.choices is not None and value not in action.choices:
            raise ConfigError(f"{path}: {dest} must be one of {sorted(action.choices)}")
        action.default = value
        action.required = False


def parse_args(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    path = _config_path(argv)
    if path:
        command = next((tok for tok in argv if tok in parser.subcommands), None)
        if command is not None:
            _apply_config(parser.subcommands[command], read_config_file(path), path)
    return parser.parse_args(argv)


def _parse_grid(items):
    grid = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"grid entry {item!r} is not FIELD=V1,V2")
        k, vals = item.split("=", 1)
        k = k.strip().replace("-", "_")
        conv = int if k in ("num_tasks", "num_workers") else float
        try:
            grid[k] = [conv(v) for v in _list(vals)]
        except ValueError:
            raise ConfigError(f"bad grid values in {item!r}") from None
    return grid


def experiment_config(args, **extra):
    from .harness import ExperimentConfig
    fields = dict(checkins=args.checkins, edges=args.edges, directedness=args.directedness,
                  metric=args.metric, seed=args.seed, granularity=args.granularity,
                  valid_hours=args.valid_hours, reach_radius=args.reach_radius, speed=args.speed,
                  num_tasks=args.num_tasks, num_workers=args.num_workers)
    for k in ("days", "num_topics", "lda_iterations", "infer_sweeps", "restart", "pi_max", "colocation_radius",
              "epsilon", "o", "estimator", "strategies", "variants", "disabled", "timing", "output_dir"):
        if hasattr(args, k):
            fields[k] = getattr(args, k)
    fields.update(extra)
    try:
        return ExperimentConfig(**fields)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _checkins(args):
    from .ingest import load_checkins
    if not args.checkins:
        raise ConfigError("--checkins is required")
    return load_checkins(args.checkins)


def _graph(args, checkins=None):
    from .ingest import load_social_graph
    if not args.edges:
        raise ConfigError("--edges is required")
    users = sorted({c.user_id for c in checkins}) if checkins else ()
    return load_social_graph(args.edges, args.directedness, nodes=users)


def _dump(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def cmd_ingest(args):
    from .ingest import build_snapshots
    checkins = _checkins(args)
    graph = _graph(args, checkins) if args.edges else None
    days = sorted(_date(d) for d in args.days) or sorted({dt.datetime.fromtimestamp(c.timestamp, dt.timezone.utc)
                                                            .date() for c in checkins})
    out = {"format": "crowdinfluence-snapshots", "version": 1, "seed": args.seed, "days": {}}
    for day in days:
        snaps, _ = build_snapshots(checkins, day, args.granularity, int(round(args.valid_hours * 3600)),
                                   args.reach_radius, args.speed)
        out["days"][day.isoformat()] = [{
            "instant": s.instant,
            "workers": [[w.id, list(w.location), w.reach_radius, w.speed] for w in s.workers],
            "tasks": [[t.id, list(t.location), t.publication_time, t.valid_duration, sorted(t.categories)]
                      for t in s.tasks],
        } for s in snaps]
    if graph is not None:
        out["graph"] = {"nodes": len(graph), "edges": graph.n_edges, "hash": graph.content_hash()}
    _dump(out, args.out)
    n = sum(len(v) for v in out["days"].values())
    print(f"{len(checkins)} check-ins, {len(days)} days, {n} instances -> {args.out}")


def cmd_train_affinity(args):
    from .affinity import build_documents, train
    from .ingest import build_histories, day_start
    hist = build_histories(_checkins(args), day_start(args.before))
    docs, _ = build_documents(hist)
    if not docs:
        raise DataError("no categorised history before the given day")
    model = train([docs[w] for w in sorted(docs)], num_topics=args.num_topics, iterations=args.lda_iterations,
                  seed=args.seed, infer_sweeps=args.infer_sweeps)
    model.save(args.out)
    print(f"{len(docs)} documents, {len(model.vocabulary)} categories, {model.num_topics} topics -> {args.out}")


def cmd_fit_mobility(args):
    from .ingest import build_histories, day_start
    from .mobility import fit_mobility, save_cache
    hist = build_histories(_checkins(args), day_start(args.before))
    models = {w: fit_mobility(w, h, args.metric, args.restart, args.pi_max) for w, h in sorted(hist.items())}
    save_cache(args.out, models, hist)
    flagged = sum(m.degenerate for m in models.values())
    print(f"{len(models)} workers ({flagged} with degenerate movement) -> {args.out}")


def cmd_precompute_propagation(args):
    from .propagation import RPOParams, cache_key, rpo_collection, save_collection
    checkins = _checkins(args) if args.checkins else None
    graph = _graph(args, checkins)
    params = RPOParams(args.epsilon, args.o)
    coll, trace = rpo_collection(graph, params, seed=args.seed)
    save_collection(args.out, coll, cache_key(graph, params, args.seed))
    print(f"{coll.N} RRR sets over {len(graph)} nodes (k={trace.k}, rounds={trace.rounds}) -> {args.out}")


def cmd_assign(args):
    from .affinity import TopicModel
    from .assign import write_plan
    from .harness import ModelContext, _run_label, sample_snapshot
    from .ingest import build_histories, build_snapshots, day_start
    from .mobility import load_cache
    from .propagation import RPOParams, cache_key, load_collection
    checkins = _checkins(args)
    graph = _graph(args, checkins)
    cfg = experiment_config(args, days=(args.day,), strategies=(args.strategy,))
    before = day_start(args.day)
    topic = TopicModel.load(args.affinity_model) if args.affinity_model else None
    mobility = load_cache(args.mobility_cache, build_histories(checkins, before)) if args.mobility_cache else None
    coll = None
    if args.propagation_cache:
        coll = load_collection(args.propagation_cache, cache_key(graph, RPOParams(args.epsilon, args.o), args.seed))
    ctx = ModelContext(cfg, checkins, graph, before, topic, mobility, coll)
    snaps, _ = build_snapshots(checkins, args.day, cfg.granularity, int(round(cfg.valid_hours * 3600)),
                               cfg.reach_radius, cfg.speed)
    if not 0 <= args.instance < len(snaps):
        raise DataError(f"day {args.day} has {len(snaps)} instances, no instance {args.instance}")
    snap = sample_snapshot(snaps[args.instance], cfg.num_tasks, cfg.num_workers, cfg.seed, args.day, args.instance)
    rows, plans = _run_label(args.strategy, [snap], ctx, cfg, args.day)
    instant, plan = plans[0]
    write_plan(args.out, instant, plan, comment=f"seed={args.seed}")
    r = rows[0]
    print(f"{args.strategy}: assigned={r.assigned} ai={r.ai!r} ap={r.ap!r} mean_travel_km={r.mean_travel_km!r}")


def cmd_experiment(args):
    from .harness import run_grid
    cfg = experiment_config(args, grid=_parse_grid(args.grid))
    results = run_grid(cfg)
    for res in results:
        for row in res.summary():
            print(f"{row['strategy']}: assigned={row['assigned']!r} ai={row['ai']!r} ap={row['ap']!r} "
                  f"travel={row['mean_travel_km']!r}")
    print(f"outputs in {args.output_dir}")


def cmd_report(args):
    from .harness import SUMMARY_HEADER, fmt, report
    rows = report(args.metrics, args.out)
    if args.out is None:
        print(",".join(SUMMARY_HEADER))
        for r in rows:
            print(",".join(fmt(r[k]) for k in SUMMARY_HEADER))


def cmd_synth(args):
    from .synthetic import synthetic_world, write_world
    checkins, graph, day = synthetic_world(args.seed, n_workers=args.workers, n_tasks=args.tasks,
                                           history_days=args.history_days)
    os.makedirs(args.output_dir, exist_ok=True)
    write_world(checkins, graph, os.path.join(args.output_dir, "checkins.tsv"),
                os.path.join(args.output_dir, "edges.tsv"))
    print(f"{len(checkins)} check-ins, {len(graph)} users, experiment day {day.isoformat()}")


COMMANDS = {
    "ingest": cmd_ingest,
    "train-affinity": cmd_train_affinity,
    "fit-mobility": cmd_fit_mobility,
    "precompute-propagation": cmd_precompute_propagation,
    "assign": cmd_assign,
    "experiment": cmd_experiment,
    "report": cmd_report,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvariantError as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return 0


if __name__ == "__main__":
    sys.exit(main())
