"""Recover a follower's real-time displacement constraint from measurements.

Every solver returns unit-norm coefficients ``h`` aligned with the designated
neighbors, signed so that ``h_ii = sum(h)`` is positive whenever it is
numerically nonzero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from numpy.typing import NDArray

from .errors import (
    CaseUndetermined,
    DegenerateTriangle,
    FormctlError,
    NoPivot,
    NotEmbeddable,
    RankDeficientWarning,
    ZeroReferenceDistance,
)
from .linalg import unit_null_vector
from .measurement import Frame, Kind, MeasurementSnapshot, angles_from_bearings
from .tolerances import TOL_ANGLE, TOL_BEARING, TOL_COINCIDE, TOL_PSD_REL, TOL_RANK, TOL_WII


@dataclass
class DisplacementConstraint:
    follower: int
    neighbors: tuple
    coefficients: NDArray
    tol_wii: float = TOL_WII

    @property
    def h_ii(self) -> float:
        return float(self.coefficients.sum())

    @property
    def localizable(self) -> bool:
        return abs(self.h_ii) > self.tol_wii

    @property
    def ratios(self) -> NDArray:
        """Barycentric coefficients ``h_ij / h_ii``."""
        return self.coefficients / self.h_ii

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.neighbors, self.coefficients.tolist()))


def _check_sq_matrix(M: NDArray) -> NDArray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise NotEmbeddable(f"squared-distance matrix must be square, got {M.shape}")
    lo, hi = M.min(), M.max()
    tol = 1e-12 * max(1.0, hi, -lo)
    if not np.isfinite(hi + lo):
        raise NotEmbeddable("squared-distance matrix has non-finite entries")
    if lo < -tol:
        raise NotEmbeddable("squared-distance matrix has negative entries")
    if np.abs(M - M.T).max() > tol:
        raise NotEmbeddable("squared-distance matrix is not symmetric")
    if np.abs(M.diagonal()).max() > tol:
        raise NotEmbeddable("squared-distance matrix has a nonzero diagonal")
    return M


def mds_embed(M: NDArray, d: int, strict: bool = True, tol_psd_rel: float = TOL_PSD_REL) -> NDArray:
    """Classical MDS: a ``d x N`` configuration whose pairwise distances are ``sqrt(M)``.

    Args:
        M: ``N x N`` squared distances (or squared distance ratios).
        d: embedding dimension.
        strict: raise on eigenvalues below ``-tol_psd``; when false they are
            silently clamped (used on slightly inconsistent live data).

    Raises:
        NotEmbeddable: ``M`` is malformed or (with ``strict``) not Euclidean.
    """
    M = _check_sq_matrix(M)
    N = M.shape[0]
    # -J M J / 2 with J the centering matrix
    row = M.sum(axis=1) / N
    X = -0.5 * (M - row[:, None] - row[None, :] + row.sum() / N)
    evals, evecs = np.linalg.eigh(X)
    # eigh returns ascending order; flipping keeps ties in a fixed order
    evals, evecs = evals[::-1], evecs[:, ::-1]
    tol_psd = tol_psd_rel * max(float(evals.sum()), 0.0) / N
    if strict and evals.min() < -tol_psd:
        raise NotEmbeddable(f"eigenvalue {evals.min():.3g} below -{tol_psd:.3g}")
    top = evals[:d].copy()
    if np.count_nonzero(top > tol_psd) < d:
        warnings.warn(f"configuration spans fewer than {d} dimensions", RankDeficientWarning, stacklevel=2)
    return np.sqrt(np.maximum(top, 0.0))[:, None] * evecs[:, :d].T


def nullspace_coefficients(E: NDArray, tol_rank: float = TOL_RANK) -> NDArray:
    """Unit coefficients ``h`` with ``E h = 0`` for a ``d x (d+1)`` matrix ``E``."""
    return unit_null_vector(E, tol_rank=tol_rank)


def _from_embedding(q: NDArray, snap: MeasurementSnapshot, tol_rank: float) -> DisplacementConstraint:
    E = q[:, 1:] - q[:, [0]]
    return DisplacementConstraint(snap.follower, snap.neighbors, nullspace_coefficients(E, tol_rank))


def h_from_relative_positions(snap: MeasurementSnapshot, tol_rank: float = TOL_RANK) -> DisplacementConstraint:
    E = np.column_stack([snap.own[j] for j in snap.neighbors])
    return DisplacementConstraint(snap.follower, snap.neighbors, nullspace_coefficients(E, tol_rank))


def _pair(table: dict, a: int, b: int):
    return table[(a, b)] if (a, b) in table else table[(b, a)]


def _closed_matrix(snap: MeasurementSnapshot) -> NDArray:
    nb = snap.neighbors
    N = len(nb) + 1
    M = np.zeros((N, N))
    for k, j in enumerate(nb, start=1):
        M[0, k] = M[k, 0] = snap.own[j] ** 2
    for (a, b), (ka, kb) in zip(combinations(nb, 2), combinations(range(1, N), 2)):
        M[ka, kb] = M[kb, ka] = _pair(snap.inter, a, b) ** 2
    return M


def h_from_distances(
    snap: MeasurementSnapshot, d: int | None = None, strict: bool = True, tol_rank: float = TOL_RANK
) -> DisplacementConstraint:
    d = snap.d if d is None else d
    q = mds_embed(_closed_matrix(snap), d, strict=strict)
    return _from_embedding(q, snap, tol_rank)


def h_from_ratios(
    snap: MeasurementSnapshot, d: int | None = None, strict: bool = True, tol_rank: float = TOL_RANK
) -> DisplacementConstraint:
    d = snap.d if d is None else d
    ref = snap.reference or snap.neighbors[:2]
    if _pair(snap.inter, *ref) <= TOL_COINCIDE:
        raise ZeroReferenceDistance(f"reference pair {ref} coincides")
    q = mds_embed(_closed_matrix(snap), d, strict=strict)
    return _from_embedding(q, snap, tol_rank)


def _angle(angles: dict, a: int, b: int, c: int):
    if (a, b, c) in angles:
        return angles[(a, b, c)]
    return angles.get((a, c, b))


def ratios_from_angles(angles: dict, labels: tuple, tol_angle: float = TOL_ANGLE):
    """Squared distance-ratio matrix over ``labels`` from interior angles.

    ``angles[(a, b, c)]`` is the angle at vertex ``a`` between ``b`` and ``c``.
    The lowest-index pivot forming a proper triangle with every other pair is
    used; distances are scaled by the pivot's distance to the first other
    label.

    Returns:
        ``(M, pivot, ref)`` with ``M`` normalized so ``M[pivot, ref] = 1``.

    Raises:
        NoPivot: no label qualifies as pivot.
    """
    labels = tuple(labels)
    N = len(labels)

    def proper(a, b, c):
        tri = (_angle(angles, a, b, c), _angle(angles, b, a, c), _angle(angles, c, a, b))
        return all(x is not None and tol_angle < x < np.pi - tol_angle for x in tri)

    pivot = None
    for p in labels:
        others = [x for x in labels if x != p]
        if all(proper(p, b, c) for b, c in combinations(others, 2)):
            pivot = p
            break
    if pivot is None:
        raise NoPivot(f"no agent of {labels} forms a triangle with every other pair")
    others = [x for x in labels if x != pivot]
    ref = others[0]
    dist = {frozenset((pivot, ref)): 1.0}
    for x in others[1:]:
        s_x = np.sin(_angle(angles, x, pivot, ref))
        dist[frozenset((pivot, x))] = np.sin(_angle(angles, ref, pivot, x)) / s_x
        dist[frozenset((ref, x))] = np.sin(_angle(angles, pivot, ref, x)) / s_x
    for x, y in combinations(others[1:], 2):
        s_y = np.sin(_angle(angles, y, pivot, x))
        if s_y <= np.sin(tol_angle):
            raise DegenerateTriangle((pivot, x, y))
        dist[frozenset((x, y))] = dist[frozenset((pivot, x))] * np.sin(_angle(angles, pivot, x, y)) / s_y
    M = np.zeros((N, N))
    for (ka, a), (kb, b) in combinations(enumerate(labels), 2):
        M[ka, kb] = M[kb, ka] = dist[frozenset((a, b))] ** 2
    return M, pivot, ref


def _indicator(snap: MeasurementSnapshot, j: int) -> DisplacementConstraint:
    h = np.array([1.0 if k == j else 0.0 for k in snap.neighbors])
    return DisplacementConstraint(snap.follower, snap.neighbors, h)


def _coincident_neighbor_by_angles(angles: dict, i: int, nbrs: tuple, tol_angle: float):
    """Neighbor that follower ``i`` sits on, judged from angles alone.

    ``j`` qualifies when every angle at ``i`` between two other neighbors equals
    the matching angle at ``j``, and every other neighbor sees ``i`` and ``j``
    along the same direction. The second clause rules out points on the same
    inscribed-angle arc.
    """
    for j in nbrs:
        rest = [k for k in nbrs if k != j]
        ok = True
        for k, h in combinations(rest, 2):
            a_i, a_j = _angle(angles, i, k, h), _angle(angles, j, k, h)
            if a_i is None or a_j is None or abs(a_i - a_j) > tol_angle:
                ok = False
                break
        if ok:
            for k in rest:
                a_k = _angle(angles, k, i, j)
                if a_k is None or a_k > tol_angle:
                    ok = False
                    break
        if ok:
            return j
    return None


def _angle_pipeline(
    angles: dict, snap: MeasurementSnapshot, d: int, strict: bool, tol_angle: float, tol_rank: float
) -> DisplacementConstraint:
    labels = (snap.follower,) + tuple(snap.neighbors)
    j = _coincident_neighbor_by_angles(angles, snap.follower, snap.neighbors, tol_angle)
    if j is not None:
        return _indicator(snap, j)
    if any(_angle(angles, *key) is None for key in angles):
        raise CaseUndetermined(f"follower {snap.follower}: undefined angles but no coincident neighbor")
    M, _, _ = ratios_from_angles(angles, labels, tol_angle)
    q = mds_embed(M, d, strict=strict)
    return _from_embedding(q, snap, tol_rank)


def h_from_angles(
    snap: MeasurementSnapshot,
    d: int | None = None,
    strict: bool = True,
    tol_angle: float = TOL_ANGLE,
    tol_rank: float = TOL_RANK,
) -> DisplacementConstraint:
    d = snap.d if d is None else d
    angles = {**snap.own, **snap.inter}
    return _angle_pipeline(angles, snap, d, strict, tol_angle, tol_rank)


def bearing_angles(snap: MeasurementSnapshot) -> dict:
    """Interior angles from bearings, each computed inside one agent's frame."""
    i = snap.follower
    closed = (i,) + tuple(snap.neighbors)
    g = {(i, j): snap.own[j] for j in snap.neighbors}
    g.update(snap.inter)
    angles = {}
    for a in closed:
        others = [x for x in closed if x != a]
        for b, c in combinations(others, 2):
            gb, gc = g.get((a, b)), g.get((a, c))
            angles[(a, b, c)] = None if gb is None or gc is None else angles_from_bearings(gb, gc)
    return angles


def h_from_bearings(
    snap: MeasurementSnapshot,
    d: int | None = None,
    strict: bool = True,
    tol_bearing: float = TOL_BEARING,
    tol_angle: float = TOL_ANGLE,
    tol_rank: float = TOL_RANK,
) -> DisplacementConstraint:
    d = snap.d if d is None else d
    i = snap.follower
    if snap.kind.frame is Frame.GLOBAL:
        for j in snap.neighbors:
            rest = [k for k in snap.neighbors if k != j]
            if all(
                snap.own[k] is not None
                and snap.inter.get((j, k)) is not None
                and np.abs(snap.own[k] - snap.inter[(j, k)]).max() <= tol_bearing
                for k in rest
            ):
                return _indicator(snap, j)
    return _angle_pipeline(bearing_angles(snap), snap, d, strict, tol_angle, tol_rank)


def solve_displacement(snap: MeasurementSnapshot, strict: bool = True) -> DisplacementConstraint:
    """Dispatch to the solver matching the snapshot's measurement kind."""
    k = snap.kind.kind
    if k is Kind.RELATIVE_POSITION:
        return h_from_relative_positions(snap)
    if k is Kind.DISTANCE:
        return h_from_distances(snap, strict=strict)
    if k is Kind.RATIO:
        return h_from_ratios(snap, strict=strict)
    if k is Kind.ANGLE:
        return h_from_angles(snap, strict=strict)
    if k is Kind.BEARING:
        return h_from_bearings(snap, strict=strict)
    raise FormctlError(f"unsupported kind {k}")  # pragma: no cover
