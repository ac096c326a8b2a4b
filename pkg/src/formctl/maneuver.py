"""Piecewise maneuver schedules for scale, rotation and translation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import FormctlError, OutOfSchedule
from .linalg import plane_rotation

_BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class Param:
    """Scalar or vector parameter with a closed-form time derivative.

    ``kind`` is one of:

    * ``"constant"``: ``a``
    * ``"linear"``: ``a + b t``
    * ``"sinusoid"``: ``a + b sin(omega t + phase)``

    Time is absolute, not relative to the piece start.
    """

    kind: str
    a: tuple
    b: tuple = ()
    omega: float = 0.0
    phase: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "linear", "sinusoid"):
            raise ValueError(f"unknown parameter kind {self.kind!r}")
        object.__setattr__(self, "a", tuple(np.atleast_1d(np.asarray(self.a, dtype=float)).tolist()))
        b = self.b if len(np.atleast_1d(self.b)) else np.zeros(len(self.a))
        object.__setattr__(self, "b", tuple(np.atleast_1d(np.asarray(b, dtype=float)).tolist()))
        object.__setattr__(self, "_arrays", (np.array(self.a), np.array(self.b)))

    @classmethod
    def constant(cls, a):
        return cls("constant", a)

    @classmethod
    def linear(cls, a, b):
        return cls("linear", a, b)

    @classmethod
    def sinusoid(cls, a, b, omega, phase=0.0):
        return cls("sinusoid", a, b, float(omega), float(phase))

    def __call__(self, t: float) -> tuple[NDArray, NDArray]:
        a, b = self._arrays
        if self.kind == "constant":
            return a.copy(), np.zeros_like(a)
        if self.kind == "linear":
            return a + b * t, b.copy()
        arg = self.omega * t + self.phase
        return a + b * np.sin(arg), b * self.omega * np.cos(arg)


@dataclass(frozen=True)
class Rotation:
    """Rotation ``R_plane(angle0 + rate t)``; ``rate = 0`` gives a fixed rotation."""

    angle0: float = 0.0
    rate: float = 0.0
    plane: tuple = (0, 1)

    def __call__(self, t: float, d: int) -> tuple[NDArray, NDArray]:
        theta = self.angle0 + self.rate * t
        Q = plane_rotation(d, theta, tuple(self.plane))
        a, b = self.plane
        K = np.zeros((d, d))
        K[a, b], K[b, a] = -1.0, 1.0
        return Q, self.rate * K @ Q


@dataclass(frozen=True)
class Piece:
    t_start: float
    t_end: float
    beta: Param
    rotation: Rotation
    delta: Param
    label: str = ""


@dataclass
class ManeuverSchedule:
    d: int
    pieces: list[Piece] = field(default_factory=list)

    @property
    def t_start(self) -> float:
        return self.pieces[0].t_start

    @property
    def t_end(self) -> float:
        return self.pieces[-1].t_end

    def piece_index(self, t: float) -> int:
        """Index of the piece supplying values at ``t`` (right-derivative rule)."""
        if not self.pieces or t < self.t_start - _BOUNDARY_TOL or t > self.t_end + _BOUNDARY_TOL:
            raise OutOfSchedule(f"t={t} outside the schedule")
        for k, pc in enumerate(self.pieces):
            if pc.t_start - _BOUNDARY_TOL <= t < pc.t_end - _BOUNDARY_TOL:
                return k
        return len(self.pieces) - 1

    def breakpoints(self) -> list[float]:
        return [pc.t_start for pc in self.pieces[1:]]

    def validate(self, samples_per_piece: int = 16) -> None:
        """Check tiling, positivity of the scale, SO(d) rotations and continuity."""
        if not self.pieces:
            raise FormctlError("empty schedule")
        for prev, nxt in zip(self.pieces, self.pieces[1:]):
            if abs(prev.t_end - nxt.t_start) > _BOUNDARY_TOL:
                raise FormctlError(f"pieces leave a gap or overlap at t={prev.t_end}")
        for pc in self.pieces:
            if not pc.t_end > pc.t_start:
                raise FormctlError(f"piece [{pc.t_start}, {pc.t_end}] is empty")
            if len(pc.delta.a) != self.d:
                raise FormctlError(f"translation of piece at t={pc.t_start} is not in R^{self.d}")
            for t in np.linspace(pc.t_start, pc.t_end, samples_per_piece):
                beta = _eval_piece(pc, t, self.d)[0]
                Q = _eval_piece(pc, t, self.d)[1]
                if beta <= 0:
                    raise FormctlError(f"scale {beta} is not positive at t={t}")
                if np.abs(Q.T @ Q - np.eye(self.d)).max() > 1e-10 or abs(np.linalg.det(Q) - 1) > 1e-10:
                    raise FormctlError(f"rotation at t={t} is not in SO({self.d})")
        for prev, nxt in zip(self.pieces, self.pieces[1:]):
            t = nxt.t_start
            left = _eval_piece(prev, t, self.d)
            right = _eval_piece(nxt, t, self.d)
            gap = max(abs(left[0] - right[0]), np.abs(left[1] - right[1]).max(), np.abs(left[2] - right[2]).max())
            if gap > 1e-9:
                raise FormctlError(f"schedule is discontinuous at t={t} (jump {gap:.3g})")


def _eval_piece(pc: Piece, t: float, d: int):
    beta, dbeta = pc.beta(t)
    Q, dQ = pc.rotation(t, d)
    delta, ddelta = pc.delta(t)
    return float(beta[0]), Q, delta, float(dbeta[0]), dQ, ddelta


def evaluate_maneuver(schedule: ManeuverSchedule, t: float, piece: int | None = None):
    """Return ``(beta, Q, delta, dbeta, dQ, ddelta)`` at time ``t``.

    At a breakpoint the piece starting there supplies the derivatives.
    Passing ``piece`` evaluates that piece's closed form instead, which lets
    an integrator step that ends on a breakpoint stay on one piece.

    Raises:
        OutOfSchedule: ``t`` lies outside every piece.
    """
    k = schedule.piece_index(t) if piece is None else piece
    return _eval_piece(schedule.pieces[k], t, schedule.d)
