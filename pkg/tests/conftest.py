"""Shared oracles and fixtures.

The oracles deliberately avoid the package's own numerics: nullspaces come
from cofactor expansions, path counts from networkx.
"""

from __future__ import annotations

import itertools

import networkx as nx
import numpy as np
import pytest

from formctl.graph import FormationGraph, fig1_graph, passage_graph

FIG1_R = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [-1.0, 1.0], [-1.0, -1.0], [-2.0, 0.0]])
PASSAGE_R = np.array([[2.0, 1.0], [-1.0, 3.0], [-1.0, -1.0], [-4.0, 3.0], [-4.0, -1.0]])


def cofactor_null(E: np.ndarray) -> np.ndarray:
    """Unit nullspace vector of a k x (k+1) matrix by signed maximal minors."""
    E = np.asarray(E, dtype=float)
    k = E.shape[1]
    h = np.array([(-1) ** c * np.linalg.det(np.delete(E, c, axis=1)) for c in range(k)])
    h = h / np.linalg.norm(h)
    return h if h.sum() > 0 else -h


def oracle_h(points: np.ndarray) -> np.ndarray:
    """Normalized displacement coefficients of ``points[0]`` w.r.t. ``points[1:]``."""
    P = np.asarray(points, dtype=float)
    return cofactor_null((P[1:] - P[0]).T)


def same_direction(a, b) -> float:
    """Distance between two vectors after unit normalization (sign-sensitive)."""
    a = np.asarray(a, float) / np.linalg.norm(a)
    b = np.asarray(b, float) / np.linalg.norm(b)
    return float(np.abs(a - b).max())


def nx_path_count(graph: FormationGraph, i: int) -> int:
    """Internally vertex-disjoint leader-to-``i`` paths via networkx connectivity."""
    G = nx.DiGraph()
    G.add_nodes_from(range(1, graph.n + 1))
    for a, b in graph.edges:
        G.add_edge(b, a)  # information flows b -> a
    G.add_node("S")
    for l in graph.leaders:
        G.add_edge("S", l)
    return nx.algorithms.connectivity.local_node_connectivity(G, "S", i)


def random_tuple(rng: np.random.Generator, d: int, spread: float = 3.0, min_gap: float = 0.3):
    """Follower plus d+1 neighbors in general position, well separated."""
    while True:
        P = rng.uniform(-spread, spread, size=(d + 2, d))
        gaps = [np.linalg.norm(P[a] - P[b]) for a, b in itertools.combinations(range(d + 2), 2)]
        if min(gaps) < min_gap:
            continue
        E = (P[1:] - P[0]).T
        _, s, _ = np.linalg.svd(E)
        if s[-1] / s[0] < 0.05:
            continue
        # every sub-simplex well conditioned too, so the follower is localizable
        vols = []
        for c in range(d + 1):
            S = np.delete(P[1:], c, axis=0)
            S = np.vstack([S, P[0]])
            vols.append(abs(np.linalg.det(S[1:] - S[0])))
        Q = P[1:]
        full = abs(np.linalg.det(Q[1:] - Q[0]))
        if full < 0.5 or min(vols) < 0.05:
            continue
        return P


@pytest.fixture
def fig1():
    return fig1_graph()


@pytest.fixture
def passage():
    return passage_graph()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
