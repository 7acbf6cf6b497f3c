"""Social propagation under the independent cascade model.

Pairwise informed probabilities are estimated from random reverse reachable
(RRR) sets: a worker ``s`` informs ``i`` with the probability that ``s`` lies
in an RRR set rooted at ``i``. The number of sets is chosen adaptively from
two sample-size lower bounds, one driven by a halving schedule of candidate
informed ranges and one by the certified range of the greedy informed worker.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from . import _backend
from .errors import DataError, DomainError

log = logging.getLogger(__name__)

SCALED = "scaled"
ROOT_FRACTION = "root-fraction"
ESTIMATORS = (SCALED, ROOT_FRACTION)
CHUNK = 4096


@dataclass(frozen=True)
class RPOParams:
    epsilon: float = 0.1
    o: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise DomainError("epsilon must lie in (0, 1)")
        if self.o < 1.0:
            raise DomainError("o must be >= 1")

    @property
    def eps_star(self) -> float:
        return math.sqrt(2.0) * self.epsilon

    def lam(self, n: int) -> float:
        return 1.0 / n ** self.o

    def lam_star(self, n: int) -> float:
        return 1.0 / (n ** self.o * math.log2(n))


def k_schedule(n: int) -> list:
    """Candidate range lower bounds ``n/2, n/4, ..., 2`` (integer halving)."""
    k = max(n // 2, 2)
    out = [k]
    while k > 2:
        k = max(k // 2, 2)
        out.append(k)
    return out


def bound_iteration_value(k: float, params: RPOParams, n: int) -> float:
    if k < 2:
        raise DomainError("k must be >= 2")
    if n < 2:
        raise DomainError("need at least two workers")
    e = params.eps_star
    return (2.0 + 2.0 / 3.0 * e) * (math.log(n) + math.log(1.0 / params.lam_star(n))) * n / (e * e * k)


def bound_iteration(k: float, params: RPOParams, n: int) -> int:
    """Sets needed so that ``max N_p < (1 + eps*) k`` whenever every range is below ``k``."""
    return math.ceil(bound_iteration_value(k, params, n))


def bound_threshold_value(sigma_lower: float, params: RPOParams, n: int) -> float:
    if not sigma_lower > 0:
        raise DomainError("sigma lower bound must be positive")
    return 2.0 * n * math.log(1.0 / params.lam(n)) / (sigma_lower * params.epsilon ** 2)


def bound_threshold(sigma_lower: float, params: RPOParams, n: int) -> int:
    """Sets needed for a (1 - eps) estimate of a range of at least ``sigma_lower``."""
    return math.ceil(bound_threshold_value(sigma_lower, params, n))


class RRRCollection:
    """A multiset of RRR sets stored flat: ``members[offsets[j]:offsets[j+1]]`` is set j.

    Members are node indices into ``nodes``; the first member of each set is
    its root.
    """

    def __init__(self, nodes, roots=None, offsets=None, members=None):
        self.nodes = list(nodes)
        self.roots = np.zeros(0, np.int64) if roots is None else np.asarray(roots, np.int64)
        self.offsets = np.zeros(1, np.int64) if offsets is None else np.asarray(offsets, np.int64)
        self.members = np.zeros(0, np.int64) if members is None else np.asarray(members, np.int64)
        self._pairs = None
        self._cover = None

    def __len__(self):
        return len(self.roots)

    @property
    def N(self) -> int:
        return len(self.roots)

    def set(self, j):
        return self.members[self.offsets[j]:self.offsets[j + 1]]

    def sets(self):
        """Yield ``(root id, frozenset of member ids)``."""
        for j in range(self.N):
            yield self.nodes[self.roots[j]], frozenset(self.nodes[m] for m in self.set(j))

    def extend(self, other: "RRRCollection"):
        self.roots = np.concatenate([self.roots, other.roots])
        self.offsets = np.concatenate([self.offsets, other.offsets[1:] + self.offsets[-1]])
        self.members = np.concatenate([self.members, other.members])
        self._pairs = self._cover = None

    def clear(self):
        self.__init__(self.nodes)

    def set_sizes(self):
        return np.diff(self.offsets)

    def coverage(self) -> np.ndarray:
        """Number of sets containing each node."""
        if self._cover is None:
            self._cover = np.bincount(self.members, minlength=len(self.nodes))
        return self._cover

    def root_counts(self) -> np.ndarray:
        """``|R_i|``: number of sets rooted at each node."""
        return np.bincount(self.roots, minlength=len(self.nodes))

    def pair_counts(self) -> sp.csr_matrix:
        """Sparse ``C[s, i]`` = number of sets rooted at ``i`` that contain ``s``."""
        if self._pairs is None:
            n = len(self.nodes)
            cols = np.repeat(self.roots, self.set_sizes())
            data = np.ones(len(self.members), dtype=np.int64)
            self._pairs = sp.coo_matrix((data, (self.members, cols)), shape=(n, n)).tocsr()
        return self._pairs

    def sets_containing(self, node_id):
        """Indices of sets containing ``node_id``."""
        idx = self.nodes.index(node_id)
        hit = np.nonzero(self.members == idx)[0]
        return np.searchsorted(self.offsets, hit, side="right") - 1


class RRRSampler:
    """Deterministic, chunked RRR set generator.

    Every call to :meth:`sample` spawns child seeds from one SeedSequence, one
    per chunk of ``chunk`` sets, so results depend only on the seed and the
    sequence of requested sizes.
    """

    def __init__(self, graph, seed=0, chunk=CHUNK, backend=None):
        if len(graph) == 0:
            raise DomainError("empty graph")
        self.graph = graph
        self.csr = graph.reverse_csr()
        self.seq = np.random.SeedSequence(seed)
        self.chunk = int(chunk)
        self.kern = _backend.get(backend)

    def _chunk(self, m, rng):
        n = len(self.graph)
        roots = rng.integers(n, size=m).astype(np.int64)
        return _reach_many(self.kern, self.csr, roots, rng, self.graph.nodes)

    def sample(self, n_sets: int) -> RRRCollection:
        out = RRRCollection(self.graph.nodes)
        left = int(n_sets)
        while left > 0:
            m = min(left, self.chunk)
            rng = np.random.default_rng(self.seq.spawn(1)[0])
            out.extend(self._chunk(m, rng))
            left -= m
        return out


def _reach_many(kern, csr, roots, rng, nodes, ubuf=None) -> RRRCollection:
    """Run the reach kernel for every root, refilling buffers as it asks."""
    indptr, indices, probs = csr
    n = len(indptr) - 1
    n_edges = int(indptr[-1])
    if ubuf is None:
        ubuf = 2 * n_edges + 65536
    roots_out, offs, mems = [], [np.zeros(1, np.int64)], []
    base = 0
    done = 0
    while done < len(roots):
        todo = roots[done:]
        cap = max(n, min(len(todo) * 4, 1 << 22))
        members = np.empty(cap, dtype=np.int64)
        offsets = np.zeros(len(todo) + 1, dtype=np.int64)
        got, _ = kern.reach_batch(indptr, indices, probs, todo, rng.random(ubuf), members, offsets)
        roots_out.append(todo[:got])
        mems.append(members[:offsets[got]].copy())
        offs.append(offsets[1:got + 1] + base)
        base += int(offsets[got])
        done += got
    return RRRCollection(nodes, np.concatenate(roots_out) if roots_out else None,
                         np.concatenate(offs), np.concatenate(mems) if mems else None)


def sample_rrr_set(graph, rng, backend=None):
    """One RRR set: a uniform root plus every worker reaching it in a sampled reverse graph."""
    if len(graph) == 0:
        raise DomainError("empty graph")
    kern = _backend.get(backend)
    root = np.array([rng.integers(len(graph))], dtype=np.int64)
    coll = _reach_many(kern, graph.reverse_csr(), root, rng, graph.nodes, graph.n_edges)
    return graph.nodes[int(root[0])], frozenset(graph.nodes[m] for m in coll.set(0))


def ic_simulate(graph, seed_worker, rng, backend=None) -> frozenset:
    """One independent-cascade run from ``seed_worker``; returns the informed set."""
    if seed_worker not in graph.index:
        raise DomainError(f"unknown worker {seed_worker!r}")
    kern = _backend.get(backend)
    root = np.array([graph.index[seed_worker]], dtype=np.int64)
    coll = _reach_many(kern, graph.forward_csr(), root, rng, graph.nodes, graph.n_edges)
    return frozenset(graph.nodes[m] for m in coll.set(0))


def ic_monte_carlo(graph, seed_worker, runs: int, seed=0, backend=None, chunk=50_000) -> np.ndarray:
    """Fraction of ``runs`` cascades from ``seed_worker`` that inform each node."""
    if seed_worker not in graph.index:
        raise DomainError(f"unknown worker {seed_worker!r}")
    kern = _backend.get(backend)
    seq = np.random.SeedSequence(seed)
    counts = np.zeros(len(graph), dtype=np.int64)
    s = graph.index[seed_worker]
    left = runs
    while left > 0:
        m = min(left, chunk)
        rng = np.random.default_rng(seq.spawn(1)[0])
        coll = _reach_many(kern, graph.forward_csr(), np.full(m, s, dtype=np.int64), rng, graph.nodes)
        counts += np.bincount(coll.members, minlength=len(graph))
        left -= m
    return counts / runs


def informed_range(collection: RRRCollection, w_s, n: int | None = None) -> float:
    """``|W| * (sets containing w_s) / N``."""
    if collection.N == 0:
        raise DomainError("empty RRR collection")
    n = len(collection.nodes) if n is None else n
    idx = collection.nodes.index(w_s)
    return n * float(collection.coverage()[idx]) / collection.N


@dataclass
class RPOTrace:
    """How the adaptive loop sized the collection."""

    k: int
    n_iteration: int
    n_threshold: int | None
    np_opt: float
    sigma_lower: float | None
    exhausted: bool
    n_sets: int
    rounds: int


def rpo_collection(graph, params: RPOParams = RPOParams(), seed=0, backend=None, sampler=None):
    """Size and draw the RRR collection by the adaptive two-bound loop.

    Returns ``(collection, trace)``. If the halving schedule reaches ``k = 2``
    without passing the threshold test, the last round's sets are kept and
    no top-up is made.
    """
    n = len(graph)
    if n == 0:
        raise DomainError("empty graph")
    sampler = sampler or RRRSampler(graph, seed, backend=backend)
    if n == 1:
        coll = sampler.sample(1)
        return coll, RPOTrace(2, 1, None, 1.0, None, False, 1, 1)
    coll = RRRCollection(graph.nodes)
    n_thr = sigma_lower = None
    exhausted = False
    rounds = 0
    schedule = k_schedule(n)
    for k in schedule:
        rounds += 1
        n_iter = bound_iteration(k, params, n)
        coll = sampler.sample(n_iter)
        np_opt = n * float(coll.coverage().max()) / coll.N
        gamma = (1.0 + params.eps_star) * k
        if np_opt >= gamma:
            sigma_lower = np_opt * k / gamma
            n_thr = bound_threshold(sigma_lower, params, n)
            break
        if k == schedule[-1]:
            exhausted = True
            log.info("threshold test never passed; keeping %d sets from k=%d", coll.N, k)
    if n_thr is not None and coll.N < n_thr:
        coll.extend(sampler.sample(n_thr - coll.N))
    return coll, RPOTrace(k, n_iter, n_thr, np_opt, sigma_lower, exhausted, coll.N, rounds)


@dataclass
class PropagationTable:
    """Informed probabilities ``P(w_s informs w_i)`` for one source worker."""

    root: str
    nodes: list
    raw: np.ndarray
    estimator: str = SCALED

    @property
    def clamped(self) -> np.ndarray:
        return np.clip(self.raw, 0.0, 1.0)

    def __getitem__(self, worker_id) -> float:
        return float(self.clamped[self.nodes.index(worker_id)])

    def outward_sum(self) -> float:
        """Sum of clamped probabilities over every worker except the source."""
        i = self.nodes.index(self.root)
        c = self.clamped
        return float(c.sum() - c[i])


def propagation_matrix(collection: RRRCollection, estimator: str = SCALED) -> sp.csr_matrix:
    """Raw estimates for every source (rows) and target (columns), diagonal excluded."""
    if estimator not in ESTIMATORS:
        raise DomainError(f"unknown estimator {estimator!r}")
    if collection.N == 0:
        raise DomainError("empty RRR collection")
    n = len(collection.nodes)
    C = collection.pair_counts().astype(np.float64)
    if estimator == SCALED:
        P = C * (n / collection.N)
    else:
        per_root = collection.root_counts().astype(np.float64)
        inv = np.divide(1.0, per_root, out=np.zeros(n), where=per_root > 0)
        P = C @ sp.diags(inv)
    P = sp.csr_matrix(P)
    P.setdiag(0.0)
    P.eliminate_zeros()
    return P


def propagation_table(collection: RRRCollection, w_s, estimator: str = SCALED) -> PropagationTable:
    """Row of :func:`propagation_matrix` for ``w_s``, with the self entry set to 1."""
    i = collection.nodes.index(w_s)
    P = propagation_matrix(collection, estimator)
    raw = P.getrow(i).toarray().ravel()
    raw[i] = 1.0
    return PropagationTable(w_s, collection.nodes, raw, estimator)


def rpo(graph, w_s, params: RPOParams = RPOParams(), seed=0, estimator: str = SCALED, backend=None):
    """Adaptive RRR sampling followed by the pairwise estimate for ``w_s``.

    Returns ``(table, trace)``.
    """
    if w_s not in graph.index:
        raise DomainError(f"unknown worker {w_s!r}")
    coll, trace = rpo_collection(graph, params, seed, backend)
    return propagation_table(coll, w_s, estimator), trace


def save_collection(path, collection: RRRCollection, key: dict):
    """Persist a collection with its cache key (graph hash, params, seed)."""
    meta = json.dumps({"format": "crowdinfluence-rrr", "version": 1, "key": key, "nodes": collection.nodes})
    with open(path, "wb") as fh:
        np.savez(fh, roots=collection.roots, offsets=collection.offsets,
                 members=collection.members, meta=np.array(meta))


def load_collection(path, key: dict | None = None) -> RRRCollection:
    """Load a collection; raises DataError if ``key`` is given and differs."""
    try:
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            if meta.get("format") != "crowdinfluence-rrr" or meta.get("version") != 1:
                raise DataError(f"{path}: not a version-1 RRR cache")
            if key is not None and meta["key"] != key:
                raise DataError(f"{path}: cache key mismatch")
            return RRRCollection(meta["nodes"], z["roots"], z["offsets"], z["members"])
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot load RRR cache {path}: {exc}") from exc


def cache_key(graph, params: RPOParams, seed) -> dict:
    return {"graph": graph.content_hash(), "params": asdict(params), "seed": seed}
