"""Snapshot builders shared by the solver and acceptance tests."""

from __future__ import annotations

import numpy as np

from formctl.graph import FormationGraph
from formctl.linalg import random_rotation
from formctl.measurement import MeasurementKind, synthesize_snapshot

KINDS = [
    ("distance", "global"),
    ("ratio", "global"),
    ("angle", "global"),
    ("bearing", "global"),
    ("bearing", "local"),
    ("relative_position", "local"),
    ("relative_position", "global"),
]


def star_graph(d: int) -> FormationGraph:
    """Leaders ``1..d+1`` all sensed by follower ``d+2``."""
    i = d + 2
    nbrs = tuple(range(1, d + 2))
    return FormationGraph(i, d + 1, d, {(i, j) for j in nbrs}, {i: nbrs})


def tuple_snapshot(P, kind, frame="global", rng=None, frames=None):
    """Snapshot of the follower ``P[0]`` with neighbors ``P[1:]``."""
    P = np.asarray(P, dtype=float)
    d = P.shape[1]
    g = star_graph(d)
    pos = np.vstack([P[1:], P[:1]])
    mk = MeasurementKind(kind, frame)
    if frame == "local" and frames is None:
        rng = rng or np.random.default_rng(0)
        frames = {a: random_rotation(d, rng) for a in range(1, d + 3)}
    return synthesize_snapshot(pos, pos, g, d + 2, mk, frames)
