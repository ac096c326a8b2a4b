"""Small linear-algebra helpers."""

from __future__ import annotations

import numpy as np
from scipy.stats import special_ortho_group

from .errors import AmbiguousNullspace
from .tolerances import TOL_RANK, TOL_WII


def unit_null_vector(E: np.ndarray, tol_rank: float = TOL_RANK, tol_sum: float = TOL_WII) -> np.ndarray:
    """Unit vector spanning the 1-D right nullspace of a ``k x (k+1)`` matrix.

    The sign is fixed so the entries sum to a positive value; when the sum is
    numerically zero the first nonzero entry is made positive instead.

    Raises:
        AmbiguousNullspace: if the nullspace has dimension above one.
    """
    E = np.atleast_2d(np.asarray(E, dtype=float))
    rows, cols = E.shape
    if rows != cols - 1:
        raise ValueError(f"expected a k x (k+1) matrix, got {E.shape}")
    _, s, vt = np.linalg.svd(E, full_matrices=True)
    if s[0] == 0.0 or s[-1] <= tol_rank * s[0]:
        raise AmbiguousNullspace(f"nullspace dimension > 1 (singular values {s})")
    h = vt[-1]
    total = h.sum()
    if abs(total) > tol_sum:
        sign = np.sign(total)
    else:
        nz = np.flatnonzero(np.abs(h) > tol_sum)
        sign = np.sign(h[nz[0]])
    return sign * h


def plane_rotation(d: int, angle: float, plane: tuple[int, int] = (0, 1)) -> np.ndarray:
    """Rotation by ``angle`` in the coordinate plane ``plane`` of R^d."""
    a, b = plane
    Q = np.eye(d)
    c, s = np.cos(angle), np.sin(angle)
    Q[a, a] = c
    Q[b, b] = c
    Q[a, b] = -s
    Q[b, a] = s
    return Q


def random_rotation(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed element of SO(d)."""
    return special_ortho_group.rvs(d, random_state=rng)
