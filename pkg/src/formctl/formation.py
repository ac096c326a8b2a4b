"""Nominal formation design, follower matrices and time-varying targets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import solve_triangular

from .errors import (
    AmbiguousNullspace,
    DegenerateNeighborhood,
    DimensionMismatch,
    FormctlError,
    NotLocalizable,
    ShapeError,
    Singular,
)
from .graph import FormationGraph
from .linalg import unit_null_vector
from .maneuver import ManeuverSchedule, evaluate_maneuver
from .tolerances import TOL_RANK, TOL_WII


def check_general_position(points: NDArray, d: int | None = None, tol_rank: float = TOL_RANK) -> bool:
    """True iff the points are not contained in any hyperplane of R^d.

    Args:
        points: ``(k, d)`` array with ``k >= d + 1``.
        d: expected dimension; inferred from ``points`` when omitted.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or (d is not None and P.shape[1] != d):
        raise DimensionMismatch(f"points of shape {P.shape} are not in R^{d}")
    d = P.shape[1]
    if P.shape[0] < d + 1:
        raise DimensionMismatch(f"need at least {d + 1} points, got {P.shape[0]}")
    diffs = (P[1:] - P[0]).T
    s = np.linalg.svd(diffs, compute_uv=False)
    return bool(s[0] > 0 and s[d - 1] > tol_rank * s[0])


def compute_nominal_weights(
    r: NDArray, graph: FormationGraph, tol_rank: float = TOL_RANK, tol_wii: float = TOL_WII
) -> dict[int, NDArray]:
    """Unit-norm displacement weights of every follower on the nominal shape.

    Returns a map ``i -> w`` with ``w[k]`` the weight of ``graph.neighbor_sets[i][k]``;
    the sign makes ``w_ii = w.sum()`` positive.

    Raises:
        DegenerateNeighborhood: nullspace of the relative-position matrix is
            more than one-dimensional.
        NotLocalizable: ``|w_ii| <= tol_wii`` (neighbors on a hyperplane).
    """
    r = np.asarray(r, dtype=float)
    weights = {}
    for i in graph.followers:
        nbrs = graph.neighbor_sets[i]
        if len(nbrs) != graph.d + 1:
            raise DegenerateNeighborhood(i, f"follower {i} needs exactly {graph.d + 1} designated neighbors")
        E = (r[[j - 1 for j in nbrs]] - r[i - 1]).T
        try:
            w = unit_null_vector(E, tol_rank=tol_rank, tol_sum=tol_wii)
        except AmbiguousNullspace as exc:
            raise DegenerateNeighborhood(i) from exc
        if abs(w.sum()) <= tol_wii:
            raise NotLocalizable(i)
        weights[i] = w
    return weights


def assemble_follower_matrices(weights: dict[int, NDArray], graph: FormationGraph) -> tuple[NDArray, NDArray]:
    """Build the leader and follower blocks of the follower matrix."""
    m, n = graph.m, graph.n
    omega = np.zeros((n - m, n))
    for i in graph.followers:
        w = np.asarray(weights[i], dtype=float)
        row = omega[i - m - 1]
        for j, wij in zip(graph.neighbor_sets[i], w):
            row[j - 1] = -wij
        row[i - 1] = w.sum()
    return omega[:, :m], omega[:, m:]


def check_localizability(omega_ff: NDArray, tol_wii: float = TOL_WII) -> bool:
    omega_ff = np.asarray(omega_ff, dtype=float)
    if omega_ff.ndim != 2 or omega_ff.shape[0] != omega_ff.shape[1]:
        raise ShapeError(f"omega_ff must be square, got {omega_ff.shape}")
    return bool(np.all(np.abs(np.diag(omega_ff)) > tol_wii))


def solve_nominal_followers(omega_fl: NDArray, omega_ff: NDArray, r_l: NDArray, tol_wii: float = TOL_WII) -> NDArray:
    """Follower positions ``r_f = -(omega_ff^-1 omega_fl (x) I_d) r_l``.

    ``r_l`` is ``(m, d)``; the result is ``(n - m, d)``.
    """
    omega_ff = np.asarray(omega_ff, dtype=float)
    if not check_localizability(omega_ff, tol_wii):
        raise Singular("omega_ff has a vanishing diagonal entry")
    if np.any(np.triu(omega_ff, 1) != 0):
        raise ShapeError("omega_ff is not lower triangular")
    rhs = -np.asarray(omega_fl, dtype=float) @ np.asarray(r_l, dtype=float)
    return solve_triangular(omega_ff, rhs, lower=True)


@dataclass
class NominalFormation:
    graph: FormationGraph
    r: NDArray
    weights: dict[int, NDArray]
    omega_fl: NDArray
    omega_ff: NDArray

    @classmethod
    def design(cls, graph: FormationGraph, r: NDArray, tol_rank: float = TOL_RANK, tol_wii: float = TOL_WII):
        r = np.asarray(r, dtype=float)
        if r.shape != (graph.n, graph.d):
            raise DimensionMismatch(f"nominal configuration has shape {r.shape}, expected {(graph.n, graph.d)}")
        weights = compute_nominal_weights(r, graph, tol_rank, tol_wii)
        omega_fl, omega_ff = assemble_follower_matrices(weights, graph)
        return cls(graph, r, weights, omega_fl, omega_ff)

    def ratios(self, i: int) -> NDArray:
        """Barycentric coefficients ``w_ij / w_ii`` aligned with ``N_i``."""
        w = self.weights[i]
        return w / w.sum()

    def residual(self, i: int) -> float:
        nbrs = self.graph.neighbor_sets[i]
        rel = self.r[[j - 1 for j in nbrs]] - self.r[i - 1]
        return float(np.linalg.norm(self.weights[i] @ rel))

    @property
    def localizable(self) -> bool:
        return check_localizability(self.omega_ff)


def target_configuration(
    nominal: NominalFormation, schedule: ManeuverSchedule, t: float, check: bool = True, piece: int | None = None
) -> tuple[NDArray, NDArray]:
    """Target positions ``beta Q r_i + delta`` and their time derivatives.

    Returns two ``(n, d)`` arrays. With ``check`` the follower targets are
    also recovered from the leader targets through the follower matrices and
    compared. ``piece`` pins the schedule piece (see ``evaluate_maneuver``).
    """
    beta, Q, delta, dbeta, dQ, ddelta = evaluate_maneuver(schedule, t, piece)
    r = nominal.r
    p = beta * r @ Q.T + delta
    dp = dbeta * r @ Q.T + beta * r @ dQ.T + ddelta
    if check and nominal.graph.n > nominal.graph.m:
        m = nominal.graph.m
        pf = solve_nominal_followers(nominal.omega_fl, nominal.omega_ff, p[:m])
        scale = 1.0 + np.abs(p).max()
        if np.abs(pf - p[m:]).max() > 1e-9 * scale:
            raise FormctlError("target followers disagree with the leader-determined targets")
    return p, dp
