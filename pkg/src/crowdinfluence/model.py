"""Workers, tasks, snapshots and the spatio-temporal eligibility predicates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError

EARTH_RADIUS_KM = 6371.0
DEFAULT_SPEED_KMH = 5.0
HAVERSINE = "haversine"
PLANAR = "planar-euclidean"
_METRIC_ALIASES = {"haversine": HAVERSINE, "planar-euclidean": PLANAR, "planar": PLANAR, "euclidean": PLANAR}


def canonical_metric(metric: str) -> str:
    try:
        return _METRIC_ALIASES[metric]
    except KeyError:
        raise DomainError(f"unknown distance metric {metric!r}") from None


def _check_point(p, metric):
    lat, lon = p
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise DomainError(f"non-finite coordinate {p!r}")
    if metric == HAVERSINE and not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise DomainError(f"coordinate out of range {p!r}")


def distance(a, b, metric: str = HAVERSINE) -> float:
    """Distance in km between two points.

    ``haversine`` reads points as (lat, lon) degrees on a sphere of radius
    6371 km. ``planar-euclidean`` reads them as km offsets on a plane.
    """
    metric = canonical_metric(metric)
    _check_point(a, metric)
    _check_point(b, metric)
    if metric == PLANAR:
        return math.hypot(a[0] - b[0], a[1] - b[1])
    lat1, lon1 = math.radians(a[0]), math.radians(a[1])
    lat2, lon2 = math.radians(b[0]), math.radians(b[1])
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def travel_time(distance_km: float, speed_kmh: float) -> float:
    """Seconds needed to cover ``distance_km`` at ``speed_kmh``."""
    if not speed_kmh > 0:
        raise DomainError(f"speed must be positive, got {speed_kmh}")
    if distance_km < 0:
        raise DomainError(f"negative distance {distance_km}")
    return distance_km / speed_kmh * 3600.0


@dataclass(frozen=True)
class SpatialTask:
    id: str
    location: tuple
    publication_time: int
    valid_duration: int
    categories: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "categories", frozenset(self.categories))
        object.__setattr__(self, "location", tuple(self.location))
        if self.valid_duration <= 0:
            raise DomainError(f"task {self.id}: valid_duration must be positive")
        if not self.categories:
            raise DomainError(f"task {self.id}: categories must be nonempty")
        lat, lon = self.location
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            raise DomainError(f"task {self.id}: location out of range")

    @property
    def deadline(self) -> int:
        return self.publication_time + self.valid_duration


@dataclass(frozen=True)
class Worker:
    id: str
    location: tuple
    reach_radius: float
    speed: float = DEFAULT_SPEED_KMH

    def __post_init__(self):
        object.__setattr__(self, "location", tuple(self.location))
        if not self.reach_radius > 0:
            raise DomainError(f"worker {self.id}: reach_radius must be positive")
        if not self.speed > 0:
            raise DomainError(f"worker {self.id}: speed must be positive")


@dataclass(frozen=True)
class Snapshot:
    """The workers and tasks available at one time instance."""

    instant: int
    workers: tuple
    tasks: tuple

    def __post_init__(self):
        object.__setattr__(self, "workers", tuple(self.workers))
        object.__setattr__(self, "tasks", tuple(self.tasks))
        for s in self.tasks:
            if not (s.publication_time <= self.instant < s.deadline):
                raise DomainError(f"task {s.id} is not live at instant {self.instant}")
        if len({w.id for w in self.workers}) != len(self.workers):
            raise DomainError("duplicate worker ids in snapshot")
        if len({s.id for s in self.tasks}) != len(self.tasks):
            raise DomainError("duplicate task ids in snapshot")


@dataclass(frozen=True)
class CandidatePair:
    worker_id: str
    task_id: str
    distance_km: float
    travel_time: float


def is_eligible(worker: Worker, task: SpatialTask, instant: int, metric: str = HAVERSINE):
    """Return the CandidatePair if ``worker`` can serve ``task``, else None."""
    d = distance(worker.location, task.location, metric)
    if d > worker.reach_radius:
        return None
    tt = travel_time(d, worker.speed)
    if instant + tt > task.deadline:
        return None
    return CandidatePair(worker.id, task.id, d, tt)


def eligible_pairs(snapshot: Snapshot, metric: str = HAVERSINE) -> list:
    """All (worker, task) pairs inside the reach radius and before the deadline.

    Sorted by worker id, then task id.
    """
    out = []
    for w in sorted(snapshot.workers, key=lambda w: w.id):
        for s in sorted(snapshot.tasks, key=lambda s: s.id):
            pair = is_eligible(w, s, snapshot.instant, metric)
            if pair is not None:
                out.append(pair)
    return out
