"""Synthetic relative measurements seen by a follower and its neighbors."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
import math
from itertools import combinations

import numpy as np
from numpy.typing import NDArray

from .errors import CoincidentAgents, FormctlError, NotUnit
from .graph import FormationGraph
from .tolerances import TOL_COINCIDE, TOL_UNIT


class Kind(str, enum.Enum):
    RELATIVE_POSITION = "relative_position"
    BEARING = "bearing"
    DISTANCE = "distance"
    ANGLE = "angle"
    RATIO = "ratio"


class Frame(str, enum.Enum):
    GLOBAL = "global"
    LOCAL = "local"


_FRAME_FREE = {Kind.DISTANCE, Kind.ANGLE, Kind.RATIO}


@dataclass(frozen=True)
class MeasurementKind:
    kind: Kind
    frame: Frame = Frame.GLOBAL

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "frame", Frame(self.frame))
        if self.kind in _FRAME_FREE and self.frame is Frame.LOCAL:
            raise FormctlError(f"{self.kind.value} measurements are frame independent; local frame not allowed")

    def __str__(self) -> str:
        if self.kind in _FRAME_FREE:
            return self.kind.value
        return f"{self.kind.value}:{self.frame.value}"


@dataclass
class MeasurementSnapshot:
    """Everything follower ``i`` knows about its neighborhood at time ``t``.

    ``own`` holds the follower's own measurements: keyed by neighbor for
    relative positions, bearings, distances and ratios; keyed by ``(i, b, c)``
    for angles at ``i``. ``inter`` holds values sensed or computed among the
    neighbors: ``(a, b)`` pairs for vectors and distances, ``(a, b, c)``
    triples (vertex first, ``b < c``) for angles. Undefined values (for a
    follower coincident with a neighbor) are ``None``.
    """

    follower: int
    t: float
    kind: MeasurementKind
    neighbors: tuple
    own: dict
    inter: dict
    neighbor_estimates: dict = field(default_factory=dict)
    reference: tuple | None = None

    @property
    def d(self) -> int:
        return len(self.neighbors) - 1


def angles_from_bearings(g_a: NDArray, g_b: NDArray) -> float:
    """Angle in ``[0, pi]`` between two unit bearings."""
    g_a = np.asarray(g_a, dtype=float)
    g_b = np.asarray(g_b, dtype=float)
    for g in (g_a, g_b):
        if abs(np.linalg.norm(g) - 1.0) > TOL_UNIT:
            raise NotUnit(f"bearing {g} is not a unit vector")
    return float(2.0 * np.arctan2(np.linalg.norm(g_a - g_b), np.linalg.norm(g_a + g_b)))


def _frame(local_frames, a: int, d: int) -> NDArray:
    if local_frames is None or a not in local_frames:
        return np.eye(d)
    return np.asarray(local_frames[a], dtype=float)


def synthesize_snapshot(
    true_positions: NDArray,
    estimates: NDArray,
    graph: FormationGraph,
    i: int,
    kind: MeasurementKind,
    local_frames: dict | None = None,
    t: float = 0.0,
    velocities: NDArray | None = None,
    arrived: dict | None = None,
    tol_coincide: float = TOL_COINCIDE,
) -> MeasurementSnapshot:
    """Measurements of follower ``i`` and its designated neighbors.

    ``true_positions`` and ``estimates`` are ``(n, d)`` arrays (row ``k`` is
    agent ``k + 1``). ``local_frames`` maps an agent to the rotation taking its
    local coordinates to global ones; agents without an entry use the global
    frame. Distance-type values among neighbors come from their estimates,
    everything else from true positions.

    Raises:
        CoincidentAgents: two neighbors coincide where a bearing, angle or
            ratio among them is needed.
    """
    P = np.asarray(true_positions, dtype=float)
    Ph = np.asarray(estimates, dtype=float)
    n, d = P.shape
    nbrs = tuple(graph.neighbor_sets[i])
    closed = (i,) + nbrs
    local = kind.frame is Frame.LOCAL
    frames = local_frames if local else None

    def rel(a, b):
        return _frame(frames, a, d).T @ (P[b - 1] - P[a - 1])

    def dist(a, b):
        return math.dist(P[b - 1], P[a - 1])

    def dist_hat(a, b):
        return math.dist(Ph[b - 1], Ph[a - 1])

    def bearing(a, b):
        e = rel(a, b)
        nrm = np.linalg.norm(e)
        if nrm <= tol_coincide:
            if i in (a, b):
                return None
            raise CoincidentAgents(a, b)
        return e / nrm

    own: dict = {}
    inter: dict = {}
    reference = None
    k = kind.kind
    if k is Kind.RELATIVE_POSITION:
        own = {j: rel(i, j) for j in nbrs}
        inter = {(a, b): rel(a, b) for a in nbrs for b in closed if b != a}
    elif k is Kind.BEARING:
        own = {j: bearing(i, j) for j in nbrs}
        inter = {(a, b): bearing(a, b) for a in nbrs for b in closed if b != a}
    elif k is Kind.DISTANCE:
        own = {j: dist(i, j) for j in nbrs}
        inter = {(a, b): dist_hat(a, b) for a, b in combinations(nbrs, 2)}
    elif k is Kind.RATIO:
        reference = (nbrs[0], nbrs[1])
        ref_true = dist(*reference)
        ref_hat = dist_hat(*reference)
        if ref_true <= tol_coincide or ref_hat <= tol_coincide:
            raise CoincidentAgents(*reference)
        own = {j: dist(i, j) / ref_true for j in nbrs}
        inter = {(a, b): dist_hat(a, b) / ref_hat for a, b in combinations(nbrs, 2)}
    elif k is Kind.ANGLE:
        X = P[[a - 1 for a in closed]]
        D = X[None, :, :] - X[:, None, :]
        L = np.sqrt(np.einsum("abk,abk->ab", D, D))
        N = len(closed)
        for a in range(N):
            for b in range(a + 1, N):
                if L[a, b] <= tol_coincide and a != 0:
                    raise CoincidentAgents(closed[a], closed[b])
        with np.errstate(invalid="ignore", divide="ignore"):
            G = D / L[:, :, None]
        # 2 atan2(|u - v|, |u + v|) stays accurate near 0 and pi
        dm = np.sqrt(((G[:, :, None, :] - G[:, None, :, :]) ** 2).sum(axis=3))
        sm = np.sqrt(((G[:, :, None, :] + G[:, None, :, :]) ** 2).sum(axis=3))
        C_all = (2.0 * np.arctan2(dm, sm)).tolist()
        for a in range(N):
            C = C_all[a]
            for b, c in combinations(range(N), 2):
                if a in (b, c):
                    continue
                undefined = L[a, b] <= tol_coincide or L[a, c] <= tol_coincide
                val = None if undefined else C[b][c]
                (own if a == 0 else inter)[(closed[a], closed[b], closed[c])] = val
    else:  # pragma: no cover
        raise FormctlError(f"unsupported kind {kind}")

    est = {}
    for j in nbrs:
        v = None if velocities is None else np.asarray(velocities[j - 1], dtype=float)
        est[j] = (Ph[j - 1].copy(), v, bool(arrived.get(j, False)) if arrived else False)
    return MeasurementSnapshot(i, t, kind, nbrs, own, inter, est, reference)
