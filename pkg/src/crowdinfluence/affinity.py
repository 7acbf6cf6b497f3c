"""Topic-model affinity between a worker's task history and a task.

Categories are words; a worker's document is the multiset of categories of
all tasks it performed, a task's document is its own category set. The topic
model is LDA trained with a collapsed Gibbs sampler, and affinity is the dot
product of the two inferred document-topic distributions.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import DataError, DomainError

log = logging.getLogger(__name__)

FORMAT = "crowdinfluence-topic-model"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class CategoryDocument:
    owner: str
    tokens: tuple

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))


def build_documents(histories, tasks=()):
    """Return ``(worker_docs, task_docs)`` keyed by owner id.

    Records without categories are ignored; a worker with none left gets no
    document.
    """
    worker_docs = {}
    dropped = 0
    for wid in sorted(histories):
        tokens = []
        for rec in histories[wid]:
            if not rec.categories:
                dropped += 1
            tokens.extend(sorted(rec.categories))
        if tokens:
            worker_docs[wid] = CategoryDocument(wid, tokens)
        else:
            log.debug("worker %s has no categorised history", wid)
    if dropped:
        log.info("ignored %d history records without categories", dropped)
    task_docs = {s.id: CategoryDocument(s.id, sorted(s.categories)) for s in tasks}
    return worker_docs, task_docs


class TopicModel:
    """A trained LDA model.

    ``topic_term[k, v]`` is P(v | topic k); ``doc_topic`` holds the training
    documents' topic distributions keyed by owner.
    """

    def __init__(self, vocabulary, topic_term, alpha, beta, seed, infer_sweeps=100, doc_topic=None):
        self.vocabulary = list(vocabulary)
        self.word_index = {w: i for i, w in enumerate(self.vocabulary)}
        self.topic_term = np.ascontiguousarray(topic_term, dtype=np.float64)
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.seed = int(seed)
        self.infer_sweeps = int(infer_sweeps)
        self.doc_topic = dict(doc_topic or {})
        self._cache = {}

    @property
    def num_topics(self) -> int:
        return self.topic_term.shape[0]

    def to_dict(self):
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "num_topics": self.num_topics,
            "alpha": self.alpha,
            "beta": self.beta,
            "seed": self.seed,
            "infer_sweeps": self.infer_sweeps,
            "vocabulary": self.vocabulary,
            "topic_term": self.topic_term.tolist(),
            "doc_topic": {k: v.tolist() for k, v in sorted(self.doc_topic.items())},
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != FORMAT or d.get("version") != FORMAT_VERSION:
            raise DataError(f"not a version-{FORMAT_VERSION} topic model dump")
        tt = np.array(d["topic_term"], dtype=np.float64).reshape(d["num_topics"], len(d["vocabulary"]))
        doc_topic = {k: np.array(v) for k, v in d.get("doc_topic", {}).items()}
        return cls(d["vocabulary"], tt, d["alpha"], d["beta"], d["seed"], d["infer_sweeps"], doc_topic)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, ValueError, KeyError) as exc:
            raise DataError(f"cannot load topic model {path}: {exc}") from exc


def _tokens(doc):
    return doc.tokens if isinstance(doc, CategoryDocument) else tuple(doc)


def train(documents, num_topics: int = 50, alpha: float | None = None, beta: float = 0.01,
          iterations: int = 1000, seed: int = 0, infer_sweeps: int = 100, backend=None) -> TopicModel:
    """Fit LDA by collapsed Gibbs sampling.

    ``documents`` is a mapping owner -> document (or a sequence, in which
    case owners are positions). ``alpha`` defaults to ``50 / num_topics``.
    """
    if isinstance(documents, dict):
        owners = sorted(documents)
        docs = [_tokens(documents[o]) for o in owners]
    else:
        docs = [_tokens(d) for d in documents]
        owners = [d.owner if isinstance(d, CategoryDocument) else i for i, d in enumerate(documents)]
    if not docs:
        raise DomainError("cannot train a topic model on zero documents")
    if num_topics < 1:
        raise DomainError("num_topics must be >= 1")
    if alpha is None:
        alpha = 50.0 / num_topics
    vocab = sorted({t for d in docs for t in d})
    if not vocab:
        raise DomainError("all training documents are empty")
    if len(vocab) < num_topics:
        log.warning("vocabulary (%d) smaller than topic count (%d)", len(vocab), num_topics)
    widx = {w: i for i, w in enumerate(vocab)}
    V = len(vocab)
    K = num_topics
    words = np.array([widx[t] for d in docs for t in d], dtype=np.int64)
    doc_of = np.array([i for i, d in enumerate(docs) for _ in d], dtype=np.int64)

    kern = _backend.get(backend)
    rng = np.random.default_rng(seed)
    z = rng.integers(K, size=len(words)).astype(np.int64)
    ndt = np.zeros((len(docs), K), dtype=np.int64)
    ntw = np.zeros((K, V), dtype=np.int64)
    np.add.at(ndt, (doc_of, z), 1)
    np.add.at(ntw, (z, words), 1)
    nt = ntw.sum(axis=1)
    for _ in range(iterations):
        kern.lda_train_sweep(doc_of, words, z, ndt, ntw, nt, float(alpha), float(beta),
                             V * float(beta), rng.random(len(words)))

    topic_term = (ntw + beta) / (nt[:, None] + V * beta)
    lengths = np.array([len(d) for d in docs], dtype=np.float64)
    theta = (ndt + alpha) / (lengths[:, None] + K * alpha)
    return TopicModel(vocab, topic_term, alpha, beta, seed, infer_sweeps,
                      {o: theta[i] for i, o in enumerate(owners)})


def _doc_seed(model, tokens):
    h = hashlib.sha256("\x1f".join(sorted(tokens)).encode()).digest()
    return [model.seed, int.from_bytes(h[:8], "little")]


def infer_topics(model: TopicModel, document, backend=None) -> np.ndarray:
    """Topic distribution of a new document under a frozen model.

    Runs ``model.infer_sweeps`` Gibbs sweeps with the topic-term matrix held
    fixed and averages each token's full conditional over the sweeps. The
    random stream is keyed by the document's tokens, so the result does not
    depend on call order. Out-of-vocabulary tokens are ignored; a document
    with none left gets the uniform distribution.
    """
    tokens = _tokens(document)
    if not tokens:
        raise DomainError("cannot infer topics of an empty document")
    key = (tuple(sorted(tokens)), backend)
    if key in model._cache:
        return model._cache[key].copy()
    K = model.num_topics
    known = [model.word_index[t] for t in sorted(tokens) if t in model.word_index]
    if not known:
        log.warning("document entirely out of vocabulary; using uniform topics")
        out = np.full(K, 1.0 / K)
    else:
        kern = _backend.get(backend)
        rng = np.random.default_rng(_doc_seed(model, tokens))
        words = np.array(known, dtype=np.int64)
        z = rng.integers(K, size=len(words)).astype(np.int64)
        ndk = np.bincount(z, minlength=K).astype(np.int64)
        accum = np.zeros(K)
        for _ in range(model.infer_sweeps):
            kern.lda_infer_sweep(words, z, ndk, model.topic_term, model.alpha, rng.random(len(words)), accum)
        expected = accum / model.infer_sweeps
        out = (expected + model.alpha) / (len(words) + K * model.alpha)
        out /= out.sum()
    model._cache[key] = out
    return out.copy()


def affinity_from_distributions(p, q) -> float:
    return float(np.clip(np.dot(p, q), 0.0, 1.0))


def affinity(model: TopicModel, worker_doc, task_doc) -> float:
    """Dot product of the worker's and the task's topic distributions.

    ``worker_doc`` may be None for a worker without history; it then gets the
    uniform distribution.
    """
    K = model.num_topics
    p = np.full(K, 1.0 / K) if worker_doc is None else infer_topics(model, worker_doc)
    q = infer_topics(model, task_doc)
    return affinity_from_distributions(p, q)
