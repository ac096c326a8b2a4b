import numpy as np
import pytest

from formctl.errors import CoincidentAgents, FormctlError, NotUnit
from formctl.graph import FormationGraph
from formctl.linalg import plane_rotation
from formctl.measurement import Frame, Kind, MeasurementKind, angles_from_bearings, synthesize_snapshot

from helpers import star_graph


def two_agent(kind, p_j, frames=None, frame="global"):
    g = FormationGraph(2, 1, 1, {(2, 1)}, {2: (1,)})
    P = np.array([p_j, [0.0, 0.0]])
    return synthesize_snapshot(P, P, g, 2, MeasurementKind(kind, frame), frames)


def test_kind_rejects_local_for_frame_free():
    for k in ("distance", "angle", "ratio"):
        with pytest.raises(FormctlError):
            MeasurementKind(k, "local")
    assert str(MeasurementKind("bearing", "local")) == "bearing:local"
    assert MeasurementKind("angle").frame is Frame.GLOBAL


def test_distance_and_bearing():
    assert two_agent("distance", [3.0, 4.0]).own[1] == 5.0
    assert np.allclose(two_agent("bearing", [2.0, 0.0]).own[1], [1.0, 0.0])


def test_local_bearing_is_rotated():
    R = plane_rotation(2, np.pi / 2)
    snap = two_agent("bearing", [2.0, 0.0], frames={2: R}, frame="local")
    # the follower's x axis points along global y, so the neighbor is at -y locally
    assert np.allclose(snap.own[1], [0.0, -1.0])


def test_angle_snapshot():
    g = FormationGraph(3, 2, 1, {(3, 1), (3, 2)}, {3: (1, 2)})
    P = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    snap = synthesize_snapshot(P, P, g, 3, MeasurementKind(Kind.ANGLE))
    assert snap.own[(3, 1, 2)] == pytest.approx(np.pi / 2)
    assert snap.inter[(1, 3, 2)] == pytest.approx(np.pi / 4)


def test_angles_from_bearings():
    assert angles_from_bearings([1, 0], [0, 1]) == pytest.approx(np.pi / 2)
    assert angles_from_bearings([1, 0], [1, 0]) == 0.0
    assert angles_from_bearings([1, 0], [-1, 0]) == pytest.approx(np.pi)
    with pytest.raises(NotUnit):
        angles_from_bearings([2, 0], [1, 0])


def test_follower_on_neighbor_gives_undefined_values():
    g = star_graph(2)
    P = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    snap = synthesize_snapshot(P, P, g, 4, MeasurementKind("angle"))
    assert snap.own[(4, 1, 2)] is None
    assert snap.inter[(3, 4, 2)] == pytest.approx(0.0)
    snap = synthesize_snapshot(P, P, g, 4, MeasurementKind("bearing"))
    assert snap.own[2] is None


def test_coincident_neighbors_raise():
    g = star_graph(2)
    P = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 1.0], [3.0, 3.0]])
    with pytest.raises(CoincidentAgents):
        synthesize_snapshot(P, P, g, 4, MeasurementKind("bearing"))
    with pytest.raises(CoincidentAgents):
        synthesize_snapshot(P, P, g, 4, MeasurementKind("ratio"))


def test_distance_snapshot_uses_estimates_among_neighbors():
    g = star_graph(2)
    P = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [3.0, 3.0]])
    Ph = P.copy()
    Ph[1] = [2.0, 0.0]
    snap = synthesize_snapshot(P, Ph, g, 4, MeasurementKind("distance"))
    assert snap.inter[(1, 2)] == pytest.approx(2.0)
    assert snap.own[2] == pytest.approx(np.hypot(2.0, 3.0))


def test_bearings_are_unit():
    rng = np.random.default_rng(3)
    g = star_graph(3)
    P = rng.normal(size=(5, 3))
    snap = synthesize_snapshot(P, P, g, 5, MeasurementKind("bearing"))
    for v in list(snap.own.values()) + list(snap.inter.values()):
        assert abs(np.linalg.norm(v) - 1.0) <= 1e-12
