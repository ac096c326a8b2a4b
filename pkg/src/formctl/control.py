"""Leader tracking law, follower maintaining/maneuvering laws and mode logic."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import MissingNeighborEstimate, NotLocalizable
from .tolerances import TOL_WII


class Mode(str, enum.Enum):
    LEADER = "L"
    MAINTAINING = "MT"
    MANEUVERING = "MV"


@dataclass(frozen=True)
class ControlGains:
    a1: float = 2.0
    a2: float = 2.0
    a3: float = 0.5
    a4: float = 2.0
    continuity_mode: bool = False
    xi_max_factor: float = 1e3
    eta_floor: float = 1e-9
    # components below this magnitude are treated as roundoff by the power terms
    sig_floor: float = 1e-12

    def __post_init__(self) -> None:
        if not (self.a1 > 0 and self.a2 > 0 and self.a4 > 0):
            raise ValueError("gains a1, a2, a4 must be positive")
        if not 0 < self.a3 < 1:
            raise ValueError("gain a3 must lie in (0, 1)")


@dataclass
class AgentRuntime:
    id: int
    p: NDArray
    p_hat: NDArray
    mode: Mode
    v_hat: NDArray = None
    arrived: bool = False
    last_u: NDArray = None

    def __post_init__(self) -> None:
        d = len(self.p)
        if self.v_hat is None:
            self.v_hat = np.zeros(d)
        if self.last_u is None:
            self.last_u = np.zeros(d)


def sig_pow(x: NDArray, l: float, floor: float = 0.0) -> NDArray:
    """Componentwise ``sgn(x) |x|^l``; components with ``|x| <= floor`` map to 0."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.sign(x) * ax**l
    if floor > 0.0:
        out[ax <= floor] = 0.0
    return out


def leader_control(tracking_error: NDArray, target_velocity: NDArray, gains: ControlGains) -> NDArray:
    e = np.asarray(tracking_error, dtype=float)
    return -gains.a1 * e - gains.a2 * sig_pow(e, gains.a3, gains.sig_floor) + np.asarray(target_velocity, dtype=float)


def _neighbor_arrays(neighbor_estimates, count):
    """Stacked neighbor estimates and velocity estimates."""
    if len(neighbor_estimates) != count:
        raise MissingNeighborEstimate(f"expected {count} neighbor estimates, got {len(neighbor_estimates)}")
    try:
        P = np.array([x[0] for x in neighbor_estimates], dtype=float)
        V = np.array([x[1] for x in neighbor_estimates], dtype=float)
    except (IndexError, TypeError, ValueError) as exc:
        raise MissingNeighborEstimate(str(exc)) from exc
    if P.ndim != 2 or V.shape != P.shape:
        raise MissingNeighborEstimate("neighbor estimates and velocities must be vectors of equal length")
    return P, V


def _as_list(neighbor_estimates):
    if isinstance(neighbor_estimates, dict):
        return list(neighbor_estimates.values())
    return list(neighbor_estimates)


def continuity_gains(eta_i: NDArray, gains: ControlGains) -> tuple[NDArray, NDArray]:
    """Per-axis gains ``(xi, varsigma)`` making the follower velocity continuous at a mode switch.

    ``varsigma`` stays at ``a2``; ``xi`` solves ``(xi/varsigma) eta = eta + sig(eta, a3)``
    per axis and is capped at ``xi_max_factor * a2`` near ``eta = 0``.
    """
    eta = np.abs(np.asarray(eta_i, dtype=float))
    a2 = gains.a2
    xi_max = gains.xi_max_factor * a2
    varsigma = np.full(eta.shape, a2)
    with np.errstate(divide="ignore"):
        xi = a2 * (1.0 + np.where(eta > 0, eta, 1.0) ** (gains.a3 - 1.0))
    xi = np.where(eta < gains.eta_floor, xi_max, np.minimum(xi, xi_max))
    return xi, varsigma


def maintain_control(
    p_hat_i: NDArray, neighbor_estimates, weights: NDArray, gains: ControlGains
) -> tuple[NDArray, NDArray]:
    """Maintaining-mode input and estimate derivative.

    Args:
        p_hat_i: follower's own estimate.
        neighbor_estimates: per neighbor ``(p_hat_j, v_hat_j, ...)`` in the
            order of ``weights``; a dict keyed by neighbor id is accepted.
        weights: nominal weights ``w_ij`` (any scale).

    Returns:
        ``(u_i, dp_hat_i/dt)``.
    """
    w = np.asarray(weights, dtype=float)
    c = w / w.sum()
    P, V = _neighbor_arrays(_as_list(neighbor_estimates), len(c))
    sp, sv = c @ P, c @ V
    p_hat_i = np.asarray(p_hat_i, dtype=float)
    y = sp - p_hat_i
    if gains.continuity_mode:
        a1, _ = continuity_gains(gains.a2 * y, gains)
    else:
        a1 = gains.a1
    u = a1 * y + sv
    dp_hat = 2.0 * a1 * y + sv
    return u, dp_hat


def maneuver_control(
    p_hat_i: NDArray, neighbor_estimates, weights: NDArray, h, gains: ControlGains, tol_wii: float = TOL_WII
) -> tuple[NDArray, NDArray]:
    """Maneuvering-mode input and estimate derivative.

    ``h`` is the live displacement constraint (an object with ``coefficients``
    or a plain coefficient array) aligned with ``weights``.

    Raises:
        NotLocalizable: ``|h_ii| <= tol_wii``.
    """
    hc = np.asarray(getattr(h, "coefficients", h), dtype=float)
    if abs(hc.sum()) <= tol_wii:
        raise NotLocalizable(getattr(h, "follower", None))
    w = np.asarray(weights, dtype=float)
    c = w / w.sum()
    P, V = _neighbor_arrays(_as_list(neighbor_estimates), len(c))
    sp, sv, sh = c @ P, c @ V, (hc / hc.sum()) @ P
    p_hat_i = np.asarray(p_hat_i, dtype=float)
    a2 = gains.a2
    if gains.continuity_mode:
        _, a2 = continuity_gains(gains.a2 * (sp - p_hat_i), gains)
    eta = a2 * (sp - p_hat_i)
    sigma = gains.a4 * (sh - p_hat_i)
    s_eta = sig_pow(eta, gains.a3, gains.sig_floor)
    u = eta + sv + s_eta
    dp_hat = 2.0 * eta + sigma + sv + s_eta + sig_pow(eta + sigma, gains.a3, gains.sig_floor)
    return u, dp_hat


def update_mode(neighbor_arrived) -> Mode:
    """Maneuvering iff every designated neighbor has arrived."""
    flags = list(neighbor_arrived.values()) if isinstance(neighbor_arrived, dict) else list(neighbor_arrived)
    return Mode.MANEUVERING if flags and all(flags) else Mode.MAINTAINING


@dataclass
class ArrivalResidual:
    consistency: float
    localization: float
    neighbors_arrived: bool


def arrival_residuals(p_hat_i, neighbor_estimates, weights, h, tol_wii: float = TOL_WII) -> ArrivalResidual:
    """Residuals of the three arrival conditions of a follower."""
    nb = _as_list(neighbor_estimates)
    flags = [bool(x[2]) for x in nb]
    hc = np.asarray(getattr(h, "coefficients", h), dtype=float)
    if abs(hc.sum()) <= tol_wii:
        if all(flags):
            raise NotLocalizable(getattr(h, "follower", None))
        return ArrivalResidual(np.inf, np.inf, False)
    w = np.asarray(weights, dtype=float)
    P = np.array([x[0] for x in nb], dtype=float)
    ch, cw = hc / hc.sum(), w / w.sum()
    a = float(np.linalg.norm((ch - cw) @ P))
    b = float(np.linalg.norm(np.asarray(p_hat_i, dtype=float) - ch @ P))
    return ArrivalResidual(a, b, all(flags))


def arrival_check(
    p_hat_i, neighbor_estimates, weights, h, eps: float, was_arrived: bool = False, tol_wii: float = TOL_WII
) -> bool:
    """Follower arrival test with hysteresis.

    Fresh arrival requires both residuals ``<= eps`` and all neighbors
    arrived; a latched arrival is kept while neighbors stay arrived and
    both residuals stay ``<= 10 eps``.
    """
    res = arrival_residuals(p_hat_i, neighbor_estimates, weights, h, tol_wii)
    if not res.neighbors_arrived:
        return False
    limit = 10.0 * eps if was_arrived else eps
    return res.consistency <= limit and res.localization <= limit


def leader_arrival_check(tracking_error, eps: float, was_arrived: bool = False) -> bool:
    limit = 10.0 * eps if was_arrived else eps
    return float(np.linalg.norm(tracking_error)) <= limit


def closed_loop_matrices(gains: ControlGains, d: int) -> tuple[NDArray, NDArray]:
    """Error-dynamics matrices of the maintaining and maneuvering laws."""
    a1, a2, a4 = gains.a1, gains.a2, gains.a4
    Da = np.kron(np.array([[a1, a1], [a1, a1]]), np.eye(d))
    Db = np.kron(np.array([[a2, a2], [a2, a2 + a4]]), np.eye(d))
    return Da, Db


def maneuver_decay_rate(gains: ControlGains, d: int = 1) -> float:
    """Constant ``c`` in ``dV/dt <= -c V^((a3+1)/2)`` for ``V = e^T Db e / 2``."""
    _, Db = closed_loop_matrices(gains, d)
    lam = np.linalg.eigvalsh(Db)
    return float((2.0 * lam.min() ** 2 / lam.max()) ** ((gains.a3 + 1.0) / 2.0))
