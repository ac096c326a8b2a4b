"""Scenario files (TOML) and CSV output of simulation logs."""

from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .control import ControlGains
from .errors import FormctlError, ParseError, ValidationError
from .formation import NominalFormation
from .graph import FormationGraph, ValidationReport, Violation, validate_graph
from .maneuver import ManeuverSchedule, Param, Piece, Rotation
from .measurement import MeasurementKind
from .sim import ScenarioConfig, TrajectoryLog, error_metrics

SECTIONS = ("meta", "nominal", "graph", "followers", "gains", "schedule", "sim")
_GAIN_KEYS = ("a1", "a2", "a3", "a4", "continuity_mode", "xi_max_factor", "eta_floor", "sig_floor")


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    """1-based line of a section header (or of ``key`` inside it), if found."""
    head = re.compile(r"^\s*\[\[?\s*" + re.escape(section) + r"(\s*\]|\.)")
    any_head = re.compile(r"^\s*\[")
    lines = text.splitlines()
    start = None
    for n, line in enumerate(lines, start=1):
        if head.match(line):
            start = n
            break
    if start is None or key is None:
        return start
    pat = re.compile(r"^\s*\"?" + re.escape(str(key)) + r"\"?\s*=")
    for n in range(start, len(lines)):
        line = lines[n]
        if any_head.match(line) and not head.match(line):
            break
        if pat.match(line):
            return n + 1
    return start


class _Reader:
    """Typed access to the decoded document with located errors."""

    def __init__(self, doc: dict, text: str):
        self.doc = doc
        self.text = text

    def fail(self, section: str, reason: str, key=None):
        raise ParseError(section, _line_of(self.text, section, key), reason)

    def section(self, name: str, required: bool = True) -> dict:
        if name not in self.doc:
            if required:
                raise ParseError(name, None, "missing section")
            return {}
        sec = self.doc[name]
        if not isinstance(sec, dict):
            self.fail(name, "must be a table")
        return sec

    def get(self, section: str, table: dict, key: str, typ, default=None, required: bool = True):
        if key not in table:
            if required:
                self.fail(section, f"missing key {key!r}")
            return default
        val = table[key]
        if typ is float and isinstance(val, int) and not isinstance(val, bool):
            val = float(val)
        if not isinstance(val, typ) or (typ is int and isinstance(val, bool)):
            self.fail(section, f"{key!r} has the wrong type ({type(val).__name__})", key)
        return val

    def array(self, section: str, table: dict, key: str, shape: tuple, required: bool = True):
        if key not in table:
            if required:
                self.fail(section, f"missing key {key!r}")
            return None
        try:
            arr = np.asarray(table[key], dtype=float)
        except (TypeError, ValueError):
            self.fail(section, f"{key!r} is not a numeric array", key)
        if arr.shape != shape:
            self.fail(section, f"{key!r} has shape {arr.shape}, expected {shape}", key)
        if not np.all(np.isfinite(arr)):
            self.fail(section, f"{key!r} has non-finite entries", key)
        return arr


def _agent_key(rd: _Reader, section: str, key: str, n: int) -> int:
    try:
        a = int(key)
    except ValueError:
        rd.fail(section, f"{key!r} is not an agent id", key)
    if not 1 <= a <= n:
        rd.fail(section, f"agent {a} outside 1..{n}", key)
    return a


def _param(rd: _Reader, entry, where: str, size: int) -> Param:
    if isinstance(entry, (int, float)) and not isinstance(entry, bool):
        entry = {"kind": "constant", "a": entry}
    if not isinstance(entry, dict) or "kind" not in entry:
        rd.fail("schedule", f"{where}: expected a table with 'kind'")
    kind = entry["kind"]
    try:
        a = np.atleast_1d(np.asarray(entry.get("a", 0.0), dtype=float))
        b = np.atleast_1d(np.asarray(entry.get("b", np.zeros(size)), dtype=float))
        if a.shape != (size,) or b.shape != (size,):
            raise ValueError(f"expected {size} components")
        if kind == "constant":
            return Param.constant(a)
        if kind == "linear":
            return Param.linear(a, b)
        if kind == "sinusoid":
            return Param.sinusoid(a, b, float(entry.get("omega", 0.0)), float(entry.get("phase", 0.0)))
    except (TypeError, ValueError) as exc:
        rd.fail("schedule", f"{where}: {exc}")
    rd.fail("schedule", f"{where}: unknown kind {kind!r}")


def _schedule(rd: _Reader, sec: dict, d: int) -> ManeuverSchedule:
    pieces_raw = sec.get("piece")
    if not isinstance(pieces_raw, list) or not pieces_raw:
        rd.fail("schedule", "needs at least one [[schedule.piece]]")
    pieces = []
    for k, pc in enumerate(pieces_raw):
        where = f"piece {k + 1}"
        t0 = rd.get("schedule", pc, "t_start", float)
        t1 = rd.get("schedule", pc, "t_end", float)
        rot = pc.get("rotation", {})
        if not isinstance(rot, dict):
            rd.fail("schedule", f"{where}: rotation must be a table")
        plane = tuple(int(x) for x in rot.get("plane", (0, 1)))
        if len(plane) != 2 or plane[0] == plane[1] or not all(0 <= x < d for x in plane):
            rd.fail("schedule", f"{where}: invalid rotation plane {plane}")
        rotation = Rotation(float(rot.get("angle0", 0.0)), float(rot.get("rate", 0.0)), plane)
        beta = _param(rd, pc.get("beta", 1.0), f"{where} beta", 1)
        if "delta" not in pc:
            rd.fail("schedule", f"{where}: missing delta")
        delta = _param(rd, pc["delta"], f"{where} delta", d)
        pieces.append(Piece(t0, t1, beta, rotation, delta, str(pc.get("label", ""))))
    for prev, nxt in zip(pieces, pieces[1:]):
        if nxt.t_start < prev.t_start:
            rd.fail("schedule", "pieces are not ordered by start time")
    schedule = ManeuverSchedule(d, pieces)
    try:
        schedule.validate()
    except FormctlError as exc:
        rd.fail("schedule", str(exc))
    return schedule


def loads_scenario(text: str) -> ScenarioConfig:
    """Parse and fully validate a scenario document.

    Raises:
        ParseError: malformed document, with section and line context.
        ValidationError: the graph or the nominal formation is invalid.
    """
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ParseError("document", int(m.group(1)) if m else None, str(exc)) from exc
    rd = _Reader(doc, text)
    unknown = sorted(set(doc) - set(SECTIONS))
    if unknown:
        rd.fail(unknown[0], "unknown section")

    meta = rd.section("meta")
    d = rd.get("meta", meta, "d", int)
    n = rd.get("meta", meta, "n", int)
    m = rd.get("meta", meta, "m", int)
    name = rd.get("meta", meta, "name", str, "scenario", required=False)
    if d < 1 or n < 1 or not 1 <= m <= n:
        rd.fail("meta", f"inconsistent sizes d={d}, n={n}, m={m}")

    r = rd.array("nominal", rd.section("nominal"), "r", (n, d))

    gsec = rd.section("graph")
    raw_edges = rd.get("graph", gsec, "edges", list)
    edges = set()
    for e in raw_edges:
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(x, int) for x in e)):
            rd.fail("graph", f"edge {e!r} is not a pair of agent ids", "edges")
        if not all(1 <= x <= n for x in e):
            rd.fail("graph", f"edge {e!r} references an agent outside 1..{n}", "edges")
        edges.add((e[0], e[1]))
    nb_raw = rd.get("graph", gsec, "neighbors", dict)
    neighbors = {}
    for key, js in nb_raw.items():
        i = _agent_key(rd, "graph", key, n)
        if not isinstance(js, list) or not all(isinstance(j, int) and 1 <= j <= n for j in js):
            rd.fail("graph", f"neighbors of {i} must be agent ids in 1..{n}", key)
        neighbors[i] = tuple(js)
    layers = None
    if "layers" in gsec:
        layers = {}
        for key, v in rd.get("graph", gsec, "layers", dict).items():
            if not isinstance(v, int):
                rd.fail("graph", f"layer of {key} must be an integer", key)
            layers[_agent_key(rd, "graph", key, n)] = v
    graph = FormationGraph(n, m, d, frozenset(edges), neighbors, layers)

    fsec = rd.section("followers")
    sensing = {}
    for key, entry in fsec.items():
        i = _agent_key(rd, "followers", key, n)
        if i <= m:
            rd.fail("followers", f"agent {i} is a leader", key)
        if isinstance(entry, str):
            entry = {"kind": entry}
        if not isinstance(entry, dict) or "kind" not in entry:
            rd.fail("followers", f"follower {i} needs a measurement kind", key)
        try:
            sensing[i] = MeasurementKind(entry["kind"], entry.get("frame", "global"))
        except (ValueError, FormctlError) as exc:
            rd.fail("followers", f"follower {i}: {exc}", key)
    missing = [i for i in range(m + 1, n + 1) if i not in sensing]
    if missing:
        rd.fail("followers", f"no measurement kind for followers {missing}")

    gsec2 = rd.section("gains", required=False)
    extra = sorted(set(gsec2) - set(_GAIN_KEYS))
    if extra:
        rd.fail("gains", f"unknown gain {extra[0]!r}", extra[0])
    try:
        kw = {k: (bool(v) if k == "continuity_mode" else float(v)) for k, v in gsec2.items()}
        gains = ControlGains(**kw)
    except (TypeError, ValueError) as exc:
        rd.fail("gains", str(exc))

    schedule = _schedule(rd, rd.section("schedule"), d)

    sim = rd.section("sim")
    dt = rd.get("sim", sim, "dt", float, 1e-3, required=False)
    t_end = rd.get("sim", sim, "t_end", float, schedule.t_end, required=False)
    eps = rd.get("sim", sim, "eps", float, 1e-3, required=False)
    seed = rd.get("sim", sim, "seed", int, 0, required=False)
    p0 = rd.array("sim", sim, "p0", (n, d))
    p_hat0 = rd.array("sim", sim, "p_hat0", (n, d), required=False)
    tolerances = {}
    for k, v in rd.get("sim", sim, "tolerances", dict, {}, required=False).items():
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            rd.fail("sim", f"tolerance {k!r} must be a number", k)
        tolerances[k] = float(v)
    local_frames = None
    if "local_frames" in sim:
        local_frames = {}
        for key, R in rd.get("sim", sim, "local_frames", dict).items():
            a = _agent_key(rd, "sim", key, n)
            R = np.asarray(R, dtype=float)
            if R.shape != (d, d) or np.abs(R.T @ R - np.eye(d)).max() > 1e-9 or np.linalg.det(R) < 0:
                rd.fail("sim", f"local frame of agent {a} is not a rotation", key)
            local_frames[a] = R

    report = validate_graph(graph)
    if not report.ok:
        raise ValidationError(report)
    try:
        nominal = NominalFormation.design(graph, r)
    except FormctlError as exc:
        agent = getattr(exc, "agent", None)
        raise ValidationError(ValidationReport([Violation("nominal-formation", agent, str(exc))])) from exc
    if not nominal.localizable:
        raise ValidationError(ValidationReport([Violation("localizability", None, "omega_ff is singular")]))
    try:
        return ScenarioConfig(
            nominal, schedule, sensing, p0, gains, dt, t_end, eps, p_hat0, local_frames, tolerances, seed, name
        )
    except FormctlError as exc:
        rd.fail("sim", str(exc))


def parse_scenario(path) -> ScenarioConfig:
    """Read a scenario file (see :func:`loads_scenario`)."""
    return loads_scenario(Path(path).read_text(encoding="utf-8"))


def _param_doc(p: Param, scalar: bool = False) -> dict:
    out = {"kind": p.kind, "a": p.a[0] if scalar else list(p.a)}
    if p.kind != "constant":
        out["b"] = p.b[0] if scalar else list(p.b)
    if p.kind == "sinusoid":
        out["omega"] = p.omega
        out["phase"] = p.phase
    return out


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    g = cfg.nominal.graph
    doc = {
        "meta": {"name": cfg.name, "d": g.d, "n": g.n, "m": g.m},
        "nominal": {"r": cfg.nominal.r.tolist()},
        "graph": {
            "edges": [list(e) for e in sorted(g.edges)],
            "neighbors": {str(i): list(v) for i, v in sorted(g.neighbor_sets.items())},
        },
        "followers": {},
        "gains": {k: getattr(cfg.gains, k) for k in _GAIN_KEYS},
        "schedule": {"piece": []},
        "sim": {"dt": cfg.dt, "t_end": cfg.t_end, "eps": cfg.eps, "seed": cfg.seed, "p0": cfg.p0.tolist()},
    }
    if g.layers is not None:
        doc["graph"]["layers"] = {str(i): v for i, v in sorted(g.layers.items())}
    for i, k in sorted(cfg.sensing.items()):
        doc["followers"][str(i)] = {"kind": k.kind.value, "frame": k.frame.value}
    for pc in cfg.schedule.pieces:
        doc["schedule"]["piece"].append({
            "label": pc.label,
            "t_start": pc.t_start,
            "t_end": pc.t_end,
            "beta": _param_doc(pc.beta, scalar=True),
            "rotation": {"angle0": pc.rotation.angle0, "rate": pc.rotation.rate, "plane": list(pc.rotation.plane)},
            "delta": _param_doc(pc.delta),
        })
    if cfg.p_hat0 is not None:
        doc["sim"]["p_hat0"] = cfg.p_hat0.tolist()
    if cfg.tolerances:
        doc["sim"]["tolerances"] = dict(cfg.tolerances)
    if cfg.local_frames is not None:
        doc["sim"]["local_frames"] = {str(a): np.asarray(R).tolist() for a, R in sorted(cfg.local_frames.items())}
    return doc


def dumps_scenario(cfg: ScenarioConfig) -> str:
    return tomli_w.dumps(scenario_to_dict(cfg))


def write_scenario(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(dumps_scenario(cfg), encoding="utf-8", newline="\n")


def bundled_scenario_path(name: str = "narrow_passage") -> Path:
    return Path(__file__).parent / "data" / f"{name}.toml"


def _g(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_header(d: int) -> list[str]:
    ax = list("xyz"[:d]) if d <= 3 else [str(k) for k in range(1, d + 1)]
    return (
        ["t", "agent"]
        + [f"p{a}" for a in ax]
        + [f"ph{a}" for a in ax]
        + ["mode", "err_track", "err_est", "err_bar"]
        + [f"u{a}" for a in ax]
    )


def write_trajectory(log: TrajectoryLog, out_dir) -> dict[str, Path]:
    """Write ``trajectory.csv``, ``events.csv`` and ``summary.csv`` into ``out_dir``.

    Floats carry 17 significant digits; files are UTF-8 with LF line endings.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {k: out / f"{k}.csv" for k in ("trajectory", "events", "summary")}

    with open(paths["trajectory"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_header(log.d))
        for s in range(len(log)):
            t = _g(log.t[s])
            for k in range(log.n):
                w.writerow(
                    [t, k + 1]
                    + [_g(x) for x in log.p[s, k]]
                    + [_g(x) for x in log.p_hat[s, k]]
                    + [log.mode[s, k], _g(log.err_track[s, k]), _g(log.err_est[s, k]), _g(log.err_bar[s, k])]
                    + [_g(x) for x in log.u[s, k]]
                )

    with open(paths["events"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "agent", "event"])
        for ev in log.events:
            w.writerow([_g(ev.t), ev.agent, ev.event])

    with open(paths["summary"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["agent", "arrival_time", "settling_time", "peak_error", "max_maintain_increase", "max_switch_jump"])
        if len(log):
            for a, s in error_metrics(log).items():
                arr = log.arrival_time.get(a, float("nan"))
                w.writerow([a, _g(arr), _g(s.settling_time), _g(s.peak_error),
                            _g(s.max_maintain_increase), _g(s.max_switch_jump)])
    return paths
