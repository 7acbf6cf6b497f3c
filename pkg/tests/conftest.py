import numpy as np
import pytest

from crowdinfluence.ingest import SocialGraph

# filled by test_acceptance; echoed after the run so the lines survive output capture
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])


def graph_from(edges, nodes=None, probs=None):
    nodes = sorted(set(nodes or ()) | {u for u, _ in edges} | {v for _, v in edges})
    return SocialGraph(nodes, edges, probs)


def random_graph(rng, n, p_edge=0.3):
    nodes = [f"w{i:02d}" for i in range(n)]
    edges = [(a, b) for a in nodes for b in nodes if a != b and rng.random() < p_edge]
    return SocialGraph(nodes, edges)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
