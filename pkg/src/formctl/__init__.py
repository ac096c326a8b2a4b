"""Distributed localization and formation maneuver control for leader-follower swarms."""

from .control import ControlGains, Mode
from .displacement import DisplacementConstraint, mds_embed, solve_displacement
from .errors import FormctlError
from .formation import NominalFormation, target_configuration
from .graph import FormationGraph, compute_layers, disjoint_path_count, validate_graph
from .maneuver import ManeuverSchedule, Param, Piece, Rotation, evaluate_maneuver
from .measurement import Frame, Kind, MeasurementKind, synthesize_snapshot
from .scenario import bundled_scenario_path, parse_scenario, write_trajectory
from .sim import ScenarioConfig, TrajectoryLog, error_metrics, run_scenario

__version__ = "0.1.0"

__all__ = [
    "ControlGains",
    "DisplacementConstraint",
    "FormationGraph",
    "FormctlError",
    "Frame",
    "Kind",
    "ManeuverSchedule",
    "MeasurementKind",
    "Mode",
    "NominalFormation",
    "Param",
    "Piece",
    "Rotation",
    "ScenarioConfig",
    "TrajectoryLog",
    "bundled_scenario_path",
    "compute_layers",
    "disjoint_path_count",
    "error_metrics",
    "evaluate_maneuver",
    "mds_embed",
    "parse_scenario",
    "run_scenario",
    "solve_displacement",
    "synthesize_snapshot",
    "target_configuration",
    "validate_graph",
    "write_trajectory",
]
