"""Check-in and friendship loaders, per-day snapshots and the social graph."""
from __future__ import annotations

import datetime as dt
import hashlib
import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DomainError
from .model import DEFAULT_SPEED_KMH, Snapshot, SpatialTask, Worker

log = logging.getLogger(__name__)

DAY = 86400
UNDIRECTED = "undirected-as-bidirectional"
DIRECTED = "directed"


@dataclass(frozen=True)
class CheckinRecord:
    user_id: str
    timestamp: int
    location: tuple
    venue_id: str
    categories: frozenset = field(default_factory=frozenset)


@dataclass(frozen=True)
class HistoryRecord:
    venue_id: str
    location: tuple
    arrival_time: int
    completion_time: int
    categories: frozenset = field(default_factory=frozenset)

    @property
    def task_ref(self):
        return (self.venue_id, self.location)


def _parse_checkin(line):
    parts = line.rstrip("\r\n").split("\t")
    if len(parts) != 6:
        raise ValueError(f"expected 6 tab-separated fields, got {len(parts)}")
    user, ts, lat, lon, venue, cats = parts
    lat, lon = float(lat), float(lon)
    if not (-90 <= lat <= 90 and -180 <= lon <= 180):
        raise ValueError("coordinate out of range")
    categories = frozenset(c.strip() for c in cats.split("|") if c.strip())
    return CheckinRecord(user.strip(), int(float(ts)), (lat, lon), venue.strip(), categories)


def _is_header(line):
    parts = line.split("\t")
    if len(parts) < 2:
        return False
    try:
        float(parts[1])
    except ValueError:
        return True
    return False


def load_checkins(path, strict: bool = False) -> list:
    """Read a tab-separated check-in file.

    Columns: ``user_id, unix_seconds, lat, lon, venue_id, cat1|cat2|...``.
    A first line whose second field is not numeric is treated as a header.
    Malformed lines are skipped and counted, or raise in strict mode.
    """
    records = []
    skipped = 0
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            if lineno == 1 and _is_header(line):
                continue
            try:
                records.append(_parse_checkin(line))
            except ValueError as exc:
                if strict:
                    raise DataError(f"{path}:{lineno}: {exc}") from exc
                skipped += 1
    if skipped:
        log.warning("%s: skipped %d malformed lines", path, skipped)
    return records


class SocialGraph:
    """Directed worker graph with per-edge informed probabilities.

    Nodes are kept in sorted id order. With the default rule every edge into
    ``v`` carries probability ``1 / in_degree(v)``.
    """

    def __init__(self, nodes, edges, probabilities=None):
        self.nodes = sorted(set(nodes) | {u for e in edges for u in e})
        self.index = {n: i for i, n in enumerate(self.nodes)}
        n = len(self.nodes)
        seen = {}
        for k, (a, b) in enumerate(edges):
            if a == b:
                raise DomainError(f"self-loop on {a!r}")
            if (a, b) in seen:
                raise DomainError(f"duplicate edge {a!r}->{b!r}")
            seen[(a, b)] = k
        order = sorted(seen, key=lambda e: (self.index[e[0]], self.index[e[1]]))
        self.src = np.array([self.index[a] for a, _ in order], dtype=np.int64)
        self.dst = np.array([self.index[b] for _, b in order], dtype=np.int64)
        self.in_degree = np.bincount(self.dst, minlength=n).astype(np.int64)
        if probabilities is None:
            self.rule = "indegree"
            self.prob = 1.0 / self.in_degree[self.dst] if len(order) else np.zeros(0)
        else:
            self.rule = "explicit"
            p = np.array([probabilities[seen[e]] for e in order], dtype=np.float64)
            if np.any(p <= 0) or np.any(p > 1):
                raise DomainError("edge probabilities must lie in (0, 1]")
            self.prob = p
        self.prob = np.asarray(self.prob, dtype=np.float64)
        self._fwd = None
        self._rev = None

    def __len__(self):
        return len(self.nodes)

    @property
    def n_edges(self):
        return len(self.src)

    def edges(self):
        for a, b, p in zip(self.src, self.dst, self.prob):
            yield self.nodes[a], self.nodes[b], float(p)

    def probability(self, u, v) -> float:
        a, b = self.index[u], self.index[v]
        hit = np.nonzero((self.src == a) & (self.dst == b))[0]
        return float(self.prob[hit[0]]) if len(hit) else 0.0

    def _csr(self, heads, tails):
        n = len(self.nodes)
        order = np.lexsort((tails, heads))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(heads, minlength=n), out=indptr[1:])
        return (indptr, np.ascontiguousarray(tails[order], dtype=np.int64),
                np.ascontiguousarray(self.prob[order], dtype=np.float64))

    def forward_csr(self):
        """Out-edges per node: ``(indptr, targets, probabilities)``."""
        if self._fwd is None:
            self._fwd = self._csr(self.src, self.dst)
        return self._fwd

    def reverse_csr(self):
        """In-edges per node: ``(indptr, sources, probabilities)``."""
        if self._rev is None:
            self._rev = self._csr(self.dst, self.src)
        return self._rev

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update("\n".join(self.nodes).encode())
        h.update(self.src.tobytes())
        h.update(self.dst.tobytes())
        h.update(self.prob.tobytes())
        return h.hexdigest()[:16]


def load_social_graph(path, directedness: str = UNDIRECTED, nodes=()) -> SocialGraph:
    """Read ``user_a \\t user_b`` lines into a SocialGraph.

    Undirected pairs become two directed edges. Self-loops are dropped and
    duplicates merged, both with a logged count.
    """
    if directedness not in (UNDIRECTED, DIRECTED):
        raise DomainError(f"unknown directedness {directedness!r}")
    edges = {}
    self_loops = dupes = 0
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 fields")
            a, b = parts
            if a == b:
                self_loops += 1
                continue
            pairs = [(a, b), (b, a)] if directedness == UNDIRECTED else [(a, b)]
            for e in pairs:
                if e in edges:
                    dupes += 1
                edges[e] = None
    if self_loops or dupes:
        log.info("%s: dropped %d self-loops, %d duplicate edges", path, self_loops, dupes)
    return SocialGraph(nodes, list(edges))


def day_start(day: dt.date) -> int:
    return int(dt.datetime(day.year, day.month, day.day, tzinfo=dt.timezone.utc).timestamp())


def build_histories(checkins, before: int | None = None) -> dict:
    """Per-user HistoryRecord lists, time ordered, from check-ins before ``before``.

    Completion time equals arrival time; raw check-ins carry no duration.
    """
    hist = defaultdict(list)
    for c in sorted(checkins, key=lambda c: (c.timestamp, c.user_id, c.venue_id)):
        if before is not None and c.timestamp >= before:
            continue
        hist[c.user_id].append(HistoryRecord(c.venue_id, c.location, c.timestamp, c.timestamp, c.categories))
    return dict(hist)


def build_snapshots(checkins, day: dt.date, granularity: int = DAY, valid_duration: int = 5 * 3600,
                    reach_radius: float = 25.0, speed: float = DEFAULT_SPEED_KMH):
    """Turn one day of check-ins into time-instance snapshots.

    Every venue visited that day becomes a task located at the venue and
    published at its earliest check-in of the day; the task joins the window
    that contains its publication. Users who check in during a window are the
    available workers, located at their latest check-in up to the instant,
    which is the window's last check-in. Tasks already expired at the
    instant are dropped.

    Returns ``(snapshots, histories)`` where histories hold every check-in
    before the day.
    """
    if granularity <= 0:
        raise DomainError("granularity must be positive")
    start = day_start(day)
    end = start + DAY
    ordered = sorted(checkins, key=lambda c: (c.timestamp, c.user_id, c.venue_id))
    histories = build_histories(ordered, before=start)
    today = [c for c in ordered if start <= c.timestamp < end]
    if not today:
        return [], histories

    first_at = {}
    cats = defaultdict(set)
    for c in today:
        first_at.setdefault(c.venue_id, c)
        cats[c.venue_id] |= c.categories

    def window(ts):
        return (ts - start) // granularity

    by_window = defaultdict(list)
    for c in today:
        by_window[window(c.timestamp)].append(c)

    last_loc = {}
    prior = [c for c in ordered if c.timestamp < start]
    for c in prior:
        last_loc[c.user_id] = c.location

    snapshots = []
    no_cats = expired = 0
    for wi in sorted(by_window):
        rows = by_window[wi]
        instant = rows[-1].timestamp
        for c in rows:
            last_loc[c.user_id] = c.location
        workers = [Worker(u, last_loc[u], reach_radius, speed) for u in sorted({c.user_id for c in rows})]
        tasks = []
        for venue, c in first_at.items():
            if window(c.timestamp) != wi:
                continue
            if not cats[venue]:
                no_cats += 1
                continue
            if c.timestamp + valid_duration <= instant:
                expired += 1
                continue
            tasks.append(SpatialTask(f"{venue}@{day.isoformat()}", c.location, c.timestamp,
                                     valid_duration, frozenset(cats[venue])))
        tasks.sort(key=lambda s: s.id)
        snapshots.append(Snapshot(instant, workers, tasks))
    if no_cats or expired:
        log.info("%s: dropped %d uncategorised and %d expired venues", day, no_cats, expired)
    return snapshots, histories
