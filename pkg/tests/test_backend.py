import os
import subprocess
import sys

import numpy as np
import pytest

from crowdinfluence import _backend
from crowdinfluence.affinity import CategoryDocument, infer_topics, train
from crowdinfluence.propagation import RRRSampler, ic_monte_carlo
from conftest import random_graph

compiled = pytest.mark.skipif("compiled" not in _backend.BACKENDS, reason="extension not built")


@compiled
def test_rrr_sets_identical_across_backends():
    g = random_graph(np.random.default_rng(0), 30, 0.1)
    a = RRRSampler(g, seed=4, backend="python").sample(3000)
    b = RRRSampler(g, seed=4, backend="compiled").sample(3000)
    assert np.array_equal(a.members, b.members) and np.array_equal(a.offsets, b.offsets)


@compiled
def test_monte_carlo_identical_across_backends():
    g = random_graph(np.random.default_rng(1), 20, 0.15)
    a = ic_monte_carlo(g, g.nodes[0], 2000, seed=2, backend="python")
    b = ic_monte_carlo(g, g.nodes[0], 2000, seed=2, backend="compiled")
    assert np.array_equal(a, b)


@compiled
def test_lda_identical_across_backends():
    rng = np.random.default_rng(2)
    docs = [CategoryDocument(f"d{i}", [f"c{j}" for j in rng.integers(0, 12, size=25)]) for i in range(12)]
    a = train(docs, num_topics=4, iterations=20, seed=1, infer_sweeps=10, backend="python")
    b = train(docs, num_topics=4, iterations=20, seed=1, infer_sweeps=10, backend="compiled")
    assert np.array_equal(a.topic_term, b.topic_term)
    d = CategoryDocument("q", ["c1", "c2", "c2"])
    assert np.array_equal(infer_topics(a, d, backend="python"), infer_topics(a, d, backend="compiled"))


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.get("fortran")


def test_pure_python_fallback_selected_by_env():
    env = dict(os.environ, CROWDINFLUENCE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from crowdinfluence import _backend; print(_backend.NAME)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
