"""Worker-task influence and location entropy."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .mobility import SAME_PLACE_KM
from .model import HAVERSINE, distance

COMPONENTS = ("affinity", "willingness", "propagation")


@dataclass(frozen=True)
class InfluenceScore:
    worker_id: str
    task_id: str
    p_aff: float
    willingness_sum: float

    @property
    def value(self) -> float:
        return self.p_aff * self.willingness_sum


@dataclass(frozen=True)
class LocationEntropy:
    task_id: str
    entropy: float
    visitor_counts: dict

    @property
    def total(self) -> int:
        return sum(self.visitor_counts.values())


def worker_task_influence(p_aff, willingness, propagation, w_s, task_id=None) -> InfluenceScore:
    """``p_aff * sum_{i != s} P_wil(i) * P_pro(s, i)``.

    ``willingness`` and ``propagation`` are either mappings keyed by worker
    id or equal-length sequences indexed over the same worker universe, in
    which case ``w_s`` is the source's position.
    """
    if isinstance(willingness, dict) or isinstance(propagation, dict):
        if not (isinstance(willingness, dict) and isinstance(propagation, dict)):
            raise DomainError("willingness and propagation must use the same indexing")
        if set(willingness) != set(propagation):
            raise DomainError("willingness and propagation cover different workers")
        total = math.fsum(willingness[i] * propagation[i] for i in sorted(willingness) if i != w_s)
    else:
        wil = np.asarray(willingness, dtype=np.float64)
        pro = np.asarray(propagation, dtype=np.float64)
        if wil.shape != pro.shape:
            raise DomainError("willingness and propagation vectors differ in length")
        terms = wil * pro
        total = float(terms.sum() - terms[w_s])
    return InfluenceScore(str(w_s), task_id, float(p_aff), total)


def entropy_from_counts(counts) -> float:
    """Shannon entropy (nats) of the visit distribution given by ``counts``."""
    c = np.asarray([x for x in counts if x > 0], dtype=np.float64)
    if c.size <= 1:
        return 0.0
    p = c / c.sum()
    return float(-np.sum(p * np.log(p)))


def location_entropy(visit_history, task_location, colocation_radius: float = SAME_PLACE_KM,
                     metric=HAVERSINE, task_id=None) -> LocationEntropy:
    """Entropy of who visited the task's location.

    ``visit_history`` maps worker id to its history records (anything with a
    ``location``), or is an iterable of ``(worker_id, location)`` visits. A
    visit counts when it lies within ``colocation_radius`` km.
    """
    if isinstance(visit_history, dict):
        visits = ((w, rec.location) for w, recs in visit_history.items() for rec in recs)
    else:
        visits = visit_history
    counts = Counter()
    for w, loc in visits:
        if distance(loc, task_location, metric) <= colocation_radius:
            counts[w] += 1
    return LocationEntropy(task_id, entropy_from_counts(counts.values()), dict(counts))


def score_pairs(pairs, affinities, willingness, propagation, node_index, disabled=()):
    """Influence for every candidate pair.

    ``affinities`` maps (worker, task) -> P_aff. ``willingness`` maps task
    id -> vector of P_wil over the social-graph nodes. ``propagation`` is the
    clamped source x target sparse matrix over the same nodes. Components
    named in ``disabled`` are replaced by the constant 1.
    """
    bad = set(disabled) - set(COMPONENTS)
    if bad:
        raise DomainError(f"unknown influence components {sorted(bad)}")
    n = len(node_index)
    out = {}
    rows = {}
    for pr in pairs:
        w, s = pr.worker_id, pr.task_id
        p_aff = 1.0 if "affinity" in disabled else affinities[(w, s)]
        wil = np.ones(n) if "willingness" in disabled else willingness[s]
        i = node_index.get(w)
        if "propagation" in disabled:
            pro = np.ones(n)
            if i is not None:
                pro[i] = 0.0
            total = float(wil @ pro)
        elif i is None:
            total = 0.0
        else:
            if i not in rows:
                rows[i] = propagation.getrow(i)
            row = rows[i]
            total = float(row.data @ wil[row.indices]) if row.nnz else 0.0
        out[(w, s)] = InfluenceScore(w, s, float(p_aff), total)
    return out
