"""Worker willingness from historical mobility.

Each worker gets a stationary distribution over the places it has performed
tasks (random walk with restart) and a Pareto distance-decay law fitted to its
consecutive hops. Willingness to visit a new task is the stationary mass times
the Pareto tail probability of the distance to the task, summed over places.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DomainError, InvariantError
from .model import HAVERSINE, distance

log = logging.getLogger(__name__)

SAME_PLACE_KM = 0.001
DEFAULT_RESTART = 0.15
DEFAULT_PI_MAX = 10.0


@dataclass(frozen=True)
class MobilityModel:
    worker_id: str
    visited_locations: tuple
    stationary: np.ndarray
    pareto_shape: float
    degenerate: bool = False
    pareto_scale: float = 1.0

    def __post_init__(self):
        if not self.pareto_shape > 0:
            raise DomainError("pareto shape must be positive")
        if abs(float(np.sum(self.stationary)) - 1.0) > 1e-9 or np.any(self.stationary < 0):
            raise InvariantError(f"stationary distribution of {self.worker_id} is not a probability vector")


def _locations(history):
    return [rec.location if hasattr(rec, "location") else tuple(rec) for rec in history]


def distinct_locations(points, metric=HAVERSINE, same_place_km=SAME_PLACE_KM):
    """Group points closer than ``same_place_km``; returns (places, label per point)."""
    places, labels = [], []
    for p in points:
        for i, q in enumerate(places):
            if distance(p, q, metric) < same_place_km:
                labels.append(i)
                break
        else:
            labels.append(len(places))
            places.append(tuple(p))
    return places, labels


def build_transition_matrix(history) -> np.ndarray:
    """Row-normalised weight matrix over the worker's task records.

    Entry (i, j) is 1 when the worker performed a task at the j-th record's
    location, which holds for every j, so each row is uniform.
    """
    n = len(history)
    if n == 0:
        raise DomainError("empty history has no transition matrix")
    m = np.ones((n, n))
    return m / m.sum(axis=1, keepdims=True)


def rwr_stationary(matrix, restart: float = DEFAULT_RESTART, tol: float = 1e-12,
                   start=None, max_iter: int = 100_000) -> np.ndarray:
    """Fixed point of ``p = (1 - c) M^T p + c u`` by power iteration."""
    M = np.asarray(matrix, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise DomainError("transition matrix must be square and nonempty")
    if np.any(M < 0) or np.max(np.abs(M.sum(axis=1) - 1.0)) > 1e-9:
        raise DomainError("transition matrix is not row-stochastic")
    if not 0.0 <= restart < 1.0:
        raise DomainError("restart probability must lie in [0, 1)")
    n = M.shape[0]
    u = np.full(n, 1.0 / n)
    p = u.copy() if start is None else np.asarray(start, dtype=np.float64) / np.sum(start)
    MT = M.T
    for _ in range(max_iter):
        nxt = (1.0 - restart) * (MT @ p) + restart * u
        if np.max(np.abs(nxt - p)) < tol:
            p = nxt
            break
        p = nxt
    else:
        raise InvariantError("random walk with restart did not converge")
    return p / p.sum()


def hop_lengths(history, metric=HAVERSINE):
    """Consecutive hop lengths in km, check-in order, with sub-metre hops set to 0."""
    pts = _locations(history)
    out = []
    for a, b in zip(pts, pts[1:]):
        d = distance(a, b, metric)
        out.append(0.0 if d < SAME_PLACE_KM else d)
    return out


def fit_pareto(history, metric=HAVERSINE, fallback: float = DEFAULT_PI_MAX) -> float:
    """Maximum-likelihood Pareto shape with scale 1 over ``x = hop + 1``.

    ``pi = (n - 1) / sum(ln x)``. When the sum is zero (no movement, or fewer
    than two records) ``fallback`` is returned.
    """
    hops = hop_lengths(history, metric)
    s = math.fsum(math.log(d + 1.0) for d in hops)
    if not hops or s == 0.0:
        return float(fallback)
    return len(hops) / s


def fit_mobility(worker_id, history, metric=HAVERSINE, restart=DEFAULT_RESTART,
                 pi_max=DEFAULT_PI_MAX) -> MobilityModel:
    """Fit the stationary distribution and Pareto shape for one worker."""
    if not history:
        raise DomainError(f"worker {worker_id} has no history")
    pts = _locations(history)
    p_records = rwr_stationary(build_transition_matrix(history), restart)
    places, labels = distinct_locations(pts, metric)
    stationary = np.zeros(len(places))
    np.add.at(stationary, labels, p_records)
    stationary /= stationary.sum()
    hops = hop_lengths(history, metric)
    degenerate = not hops or math.fsum(math.log(d + 1.0) for d in hops) == 0.0
    shape = fit_pareto(history, metric, pi_max)
    if degenerate:
        log.debug("worker %s: degenerate movement, pareto shape set to %s", worker_id, pi_max)
    return MobilityModel(worker_id, tuple(places), stationary, shape, degenerate)


def willingness(model: MobilityModel, task_location, metric=HAVERSINE) -> float:
    """Probability-weighted Pareto tail ``sum_i p_i (d_i + 1)^-pi``."""
    d = np.array([distance(loc, task_location, metric) for loc in model.visited_locations])
    return float(np.dot(model.stationary, (d + 1.0) ** (-model.pareto_shape)))


def history_hash(history) -> str:
    h = hashlib.sha256()
    for rec in history:
        h.update(repr((tuple(_locations([rec])[0]), getattr(rec, "arrival_time", None))).encode())
    return h.hexdigest()[:16]


def save_cache(path, models, histories):
    """Write fitted models keyed by worker id, each tagged with its history hash."""
    out = {}
    for wid, m in sorted(models.items()):
        out[wid] = {
            "history_hash": history_hash(histories[wid]),
            "locations": [list(p) for p in m.visited_locations],
            "stationary": m.stationary.tolist(),
            "pareto_shape": m.pareto_shape,
            "degenerate": m.degenerate,
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"format": "crowdinfluence-mobility", "version": 1, "models": out}, fh)


def load_cache(path, histories=None) -> dict:
    """Read a cache; entries whose history hash no longer matches are dropped."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot load mobility cache {path}: {exc}") from exc
    models = {}
    for wid, e in raw["models"].items():
        if histories is not None and (wid not in histories or history_hash(histories[wid]) != e["history_hash"]):
            continue
        models[wid] = MobilityModel(wid, tuple(tuple(p) for p in e["locations"]),
                                    np.array(e["stationary"]), e["pareto_shape"], e["degenerate"])
    return models
