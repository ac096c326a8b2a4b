"""Fixed-step simulation of the coupled position/estimate dynamics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .control import (
    ControlGains,
    Mode,
    arrival_check,
    leader_arrival_check,
    leader_control,
    maintain_control,
    maneuver_control,
)
from .displacement import DisplacementConstraint, solve_displacement
from .errors import FormctlError, NotLocalizable, NumericalBlowup, ScheduleExhausted
from .formation import NominalFormation, target_configuration
from .linalg import random_rotation
from .maneuver import ManeuverSchedule
from .measurement import Frame, MeasurementKind, synthesize_snapshot

log = logging.getLogger(__name__)

BLOWUP = 1e12


@dataclass
class ScenarioConfig:
    nominal: NominalFormation
    schedule: ManeuverSchedule
    sensing: dict[int, MeasurementKind]
    p0: NDArray
    gains: ControlGains = field(default_factory=ControlGains)
    dt: float = 1e-3
    t_end: float = 20.0
    eps: float = 1e-3
    p_hat0: NDArray | None = None
    local_frames: dict[int, NDArray] | None = None
    tolerances: dict[str, float] = field(default_factory=dict)
    seed: int = 0
    name: str = "scenario"

    def __post_init__(self) -> None:
        g = self.nominal.graph
        self.p0 = np.asarray(self.p0, dtype=float)
        if self.p0.shape != (g.n, g.d):
            raise FormctlError(f"initial positions have shape {self.p0.shape}, expected {(g.n, g.d)}")
        if self.p_hat0 is not None:
            self.p_hat0 = np.asarray(self.p_hat0, dtype=float)
            if self.p_hat0.shape != (g.n, g.d):
                raise FormctlError("initial estimates have the wrong shape")
        if not self.dt > 0:
            raise FormctlError("dt must be positive")
        if self.t_end < self.dt:
            raise FormctlError("t_end must be at least dt")
        missing = [i for i in g.followers if i not in self.sensing]
        if missing:
            raise FormctlError(f"no measurement kind declared for followers {missing}")
        self.sensing = {int(i): k if isinstance(k, MeasurementKind) else MeasurementKind(*k) for i, k in self.sensing.items()}
        needs_frames = any(k.frame is Frame.LOCAL for k in self.sensing.values())
        if needs_frames and self.local_frames is None:
            rng = np.random.default_rng(self.seed)
            self.local_frames = {a: random_rotation(g.d, rng) for a in range(1, g.n + 1)}

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScenarioConfig):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return np.array_equal(np.asarray(a), np.asarray(b))

        def same_frames(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.keys() == b.keys() and all(same(a[k], b[k]) for k in a)

        return (
            self.nominal.graph == other.nominal.graph
            and same(self.nominal.r, other.nominal.r)
            and self.schedule == other.schedule
            and self.sensing == other.sensing
            and same(self.p0, other.p0)
            and same(self.p_hat0, other.p_hat0)
            and same_frames(self.local_frames, other.local_frames)
            and (self.gains, self.dt, self.t_end, self.eps, self.tolerances, self.seed, self.name)
            == (other.gains, other.dt, other.t_end, other.eps, other.tolerances, other.seed, other.name)
        )

    @property
    def initial_estimates(self) -> NDArray:
        ph = self.p0.copy() if self.p_hat0 is None else self.p_hat0.copy()
        m = self.nominal.graph.m
        ph[:m] = self.p0[:m]
        return ph


@dataclass
class Event:
    t: float
    agent: int
    event: str


@dataclass
class TrajectoryLog:
    n: int
    m: int
    d: int
    t: NDArray
    p: NDArray
    p_hat: NDArray
    mode: NDArray
    u: NDArray
    err_track: NDArray
    err_est: NDArray
    err_bar: NDArray
    events: list[Event] = field(default_factory=list)
    arrival_time: dict[int, float] = field(default_factory=dict)
    dt: float = float("nan")
    eps: float = float("nan")

    def __len__(self) -> int:
        return len(self.t)

    def formation_error(self) -> NDArray:
        """Norm of the stacked follower error ``(e_bar, e_hat)``; NaN for leaders."""
        return np.sqrt(self.err_bar**2 + self.err_est**2)

    @classmethod
    def empty(cls, n: int, m: int, d: int) -> "TrajectoryLog":
        z = np.zeros((0, n))
        return cls(n, m, d, np.zeros(0), np.zeros((0, n, d)), np.zeros((0, n, d)),
                   np.zeros((0, n), dtype="<U2"), np.zeros((0, n, d)), z, z.copy(), z.copy())


class _Dynamics:
    """Stacked vector field for true positions and estimates."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.nominal = cfg.nominal
        self.graph = cfg.nominal.graph
        self.gains = cfg.gains
        self.nbr_idx = {i: [j - 1 for j in self.graph.neighbor_sets[i]] for i in self.graph.followers}
        self.weights = {i: self.nominal.weights[i] for i in self.graph.followers}

    def solve_h(self, t, P, Ph, i) -> DisplacementConstraint:
        snap = synthesize_snapshot(P, Ph, self.graph, i, self.cfg.sensing[i], self.cfg.local_frames, t=t)
        return solve_displacement(snap, strict=False)

    def __call__(self, t, P, Ph, modes, h_fallback, piece=None, h_fixed=None):
        """Return ``(dP, dPh)`` at ``(t, P, Ph)`` with modes frozen.

        Agents are evaluated in index order so every neighbor velocity estimate
        is the neighbor's estimate derivative at this very state. ``h_fixed``
        supplies constraints already solved at this state.
        """
        g = self.graph
        m = g.m
        pstar, dpstar = target_configuration(self.nominal, self.cfg.schedule, t, check=False, piece=piece)
        U = np.empty_like(P)
        dPh = np.empty_like(Ph)
        U[:m] = self._leaders(P, pstar, dpstar)
        dPh[:m] = U[:m]
        for i in g.followers:
            k = i - 1
            idx = self.nbr_idx[i]
            nb = [(Ph[j], dPh[j]) for j in idx]
            if modes[k] is Mode.MANEUVERING:
                if h_fixed is not None:
                    h = h_fixed[i]
                else:
                    h = self._live_h(t, P, Ph, i, h_fallback[i])
                U[k], dPh[k] = maneuver_control(Ph[k], nb, self.weights[i], h, self.gains)
            else:
                U[k], dPh[k] = maintain_control(Ph[k], nb, self.weights[i], self.gains)
        return U, dPh

    def _live_h(self, t, P, Ph, i, fallback):
        try:
            h = self.solve_h(t, P, Ph, i)
            if not h.localizable:
                raise NotLocalizable(i)
        except FormctlError:
            h = fallback
        return h

    def _leaders(self, P, pstar, dpstar):
        m = self.graph.m
        return leader_control(P[:m] - pstar[:m], dpstar[:m], self.gains)


def rk4_step(f, t: float, P: NDArray, Ph: NDArray, dt: float, *args, k1=None):
    """One classical Runge-Kutta step of ``(P, Ph)' = f(t, P, Ph, *args)``.

    ``k1`` may carry an already computed ``f(t, P, Ph, *args)``.

    Raises:
        NumericalBlowup: the new state is non-finite or larger than 1e12.
    """
    k1p, k1h = f(t, P, Ph, *args) if k1 is None else k1
    k2p, k2h = f(t + dt / 2, P + dt / 2 * k1p, Ph + dt / 2 * k1h, *args)
    k3p, k3h = f(t + dt / 2, P + dt / 2 * k2p, Ph + dt / 2 * k2h, *args)
    k4p, k4h = f(t + dt, P + dt * k3p, Ph + dt * k3h, *args)
    P_new = P + dt / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
    Ph_new = Ph + dt / 6 * (k1h + 2 * k2h + 2 * k3h + k4h)
    for X in (P_new, Ph_new):
        if not np.all(np.isfinite(X)) or np.abs(X).max(initial=0.0) > BLOWUP:
            raise NumericalBlowup(f"state exceeded {BLOWUP:g} at t={t + dt:g}")
    return P_new, Ph_new


def _errors(nominal: NominalFormation, P, Ph, pstar):
    g = nominal.graph
    n = g.n
    track = np.linalg.norm(P - pstar, axis=1)
    est = np.linalg.norm(Ph - P, axis=1)
    bar = np.full(n, np.nan)
    for i in g.followers:
        c = nominal.ratios(i)
        bar[i - 1] = np.linalg.norm(P[i - 1] - c @ Ph[[j - 1 for j in g.neighbor_sets[i]]])
    est[: g.m] = 0.0
    return track, est, bar


def run_scenario(cfg: ScenarioConfig, dt: float | None = None, t_end: float | None = None) -> TrajectoryLog:
    """Simulate the scenario and record every step.

    Per step: evaluate targets, refresh arrival flags, fix modes from the
    previous step's flags, integrate one RK4 step with modes frozen.
    """
    dt = cfg.dt if dt is None else dt
    t_end = cfg.t_end if t_end is None else t_end
    sched = cfg.schedule
    if t_end > sched.t_end + 1e-12 or sched.t_start > 1e-12:
        raise ScheduleExhausted(f"schedule covers [{sched.t_start}, {sched.t_end}], simulation needs [0, {t_end}]")
    g = cfg.nominal.graph
    n, m, d = g.n, g.m, g.d
    eps = cfg.eps
    steps = int(round(t_end / dt))
    f = _Dynamics(cfg)

    P = cfg.p0.copy()
    Ph = cfg.initial_estimates
    # flags broadcast at the end of the previous step
    prev = {i: False for i in range(1, n + 1)}
    modes = [Mode.LEADER] * m + [Mode.MAINTAINING] * (n - m)
    h_last: dict[int, DisplacementConstraint | None] = {i: None for i in g.followers}

    T = np.empty(steps + 1)
    LP = np.empty((steps + 1, n, d))
    LPh = np.empty_like(LP)
    LU = np.empty_like(LP)
    LM = np.empty((steps + 1, n), dtype="<U2")
    ET = np.empty((steps + 1, n))
    EE = np.empty_like(ET)
    EB = np.empty_like(ET)
    events: list[Event] = []
    arrival_time: dict[int, float] = {}

    for k in range(steps + 1):
        t = k * dt
        # the whole step uses the piece active at its start
        piece = sched.piece_index(t)
        pstar, _ = target_configuration(cfg.nominal, sched, t, check=(k == 0), piece=piece)

        cur = {}
        for i in g.leaders:
            cur[i] = leader_arrival_check(P[i - 1] - pstar[i - 1], eps, prev[i])
        for i in g.followers:
            nbrs = g.neighbor_sets[i]
            h_last[i] = None
            if all(prev[j] for j in nbrs):
                try:
                    h = f.solve_h(t, P, Ph, i)
                    if h.localizable:
                        h_last[i] = h
                except FormctlError as exc:
                    log.debug("t=%.4f follower %d: no displacement constraint (%s)", t, i, exc)
            if h_last[i] is None:
                cur[i] = False
                continue
            nb = [(Ph[j - 1], None, prev[j]) for j in nbrs]
            cur[i] = arrival_check(Ph[i - 1], nb, cfg.nominal.weights[i], h_last[i], eps, prev[i])
        for i in g.followers:
            want = Mode.MANEUVERING if h_last[i] is not None else Mode.MAINTAINING
            if want is not modes[i - 1]:
                events.append(Event(t, i, f"{modes[i - 1].name.lower()}->{want.name.lower()}"))
            modes[i - 1] = want
        for i in range(1, n + 1):
            if cur[i] and not prev[i]:
                events.append(Event(t, i, "arrived"))
                arrival_time.setdefault(i, t)
            elif prev[i] and not cur[i]:
                events.append(Event(t, i, "departed"))
        prev = cur

        U, dPh = f(t, P, Ph, modes, h_last, piece, h_last)
        T[k] = t
        LP[k], LPh[k], LU[k] = P, Ph, U
        LM[k] = [md.value for md in modes]
        ET[k], EE[k], EB[k] = _errors(cfg.nominal, P, Ph, pstar)

        if k == steps:
            break
        P, Ph = rk4_step(f, t, P, Ph, dt, modes, h_last, piece, k1=(U, dPh))
        Ph[:m] = P[:m]

    return TrajectoryLog(n, m, d, T, LP, LPh, LM, LU, ET, EE, EB, events, arrival_time, dt, eps)


@dataclass
class AgentSummary:
    agent: int
    peak_error: float
    settling_time: float
    max_maintain_increase: float
    max_switch_jump: float


def error_metrics(log: TrajectoryLog, eps: float | None = None) -> dict[int, AgentSummary]:
    """Per-agent peak error, settling time and switching diagnostics.

    The settling time is the first sample after which every error of the
    agent stays at or below ``eps`` (``inf`` if never). The maintaining
    increase is the largest growth of the stacked follower error over a step
    taken in maintaining mode; the switch jump is the largest input change
    across a sample where the mode changes.
    """
    if len(log) == 0:
        raise FormctlError("empty trajectory log")
    eps = log.eps if eps is None else eps
    errs = np.stack([log.err_track, log.err_est, np.nan_to_num(log.err_bar)], axis=0).max(axis=0)
    fe = log.formation_error()
    out = {}
    for k in range(log.n):
        agent = k + 1
        above = np.flatnonzero(errs[:, k] > eps)
        if above.size == 0:
            settle = float(log.t[0])
        elif above[-1] == len(log) - 1:
            settle = float("inf")
        else:
            settle = float(log.t[above[-1] + 1])
        inc = 0.0
        jump = 0.0
        if agent > log.m and len(log) > 1:
            mt = log.mode[:-1, k] == Mode.MAINTAINING.value
            if mt.any():
                inc = float(max(0.0, np.max(np.diff(fe[:, k])[mt])))
            sw = np.flatnonzero(log.mode[1:, k] != log.mode[:-1, k])
            if sw.size:
                jumps = np.linalg.norm(log.u[sw + 1, k] - log.u[sw, k], axis=1)
                jump = float(jumps.max())
        out[agent] = AgentSummary(agent, float(errs[:, k].max()), settle, inc, jump)
    return out


def switch_jumps(log: TrajectoryLog, agent: int, kind: str = "MT->MV") -> list[tuple[float, float]]:
    """``(t, ||u(t_k) - u(t_{k-1})||)`` at every mode switch of one follower."""
    src, dst = kind.split("->")
    k = agent - 1
    idx = np.flatnonzero((log.mode[:-1, k] == src) & (log.mode[1:, k] == dst)) + 1
    return [(float(log.t[j]), float(np.linalg.norm(log.u[j, k] - log.u[j - 1, k]))) for j in idx]
