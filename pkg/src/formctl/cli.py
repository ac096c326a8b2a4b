"""Command-line interface: ``formctl <command> ...``.

Exit codes: 0 success, 1 usage error, 2 validation failure, 3 numerical
failure. Verbosity comes from ``FORMCTL_LOG`` (``off``, ``info`` or ``debug``).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .displacement import mds_embed, solve_displacement
from .errors import FormctlError, ParseError, ScheduleExhausted, ValidationError
from .graph import validate_graph
from .measurement import Kind, MeasurementKind, MeasurementSnapshot
from .scenario import parse_scenario, write_trajectory
from .sim import run_scenario

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("formctl")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _configure_logging() -> None:
    level = os.environ.get("FORMCTL_LOG", "off").strip().lower()
    levels = {"off": None, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        raise UsageError(f"FORMCTL_LOG must be one of off, info, debug (got {level!r})")
    root = logging.getLogger("formctl")
    root.handlers.clear()
    if levels[level] is None:
        root.addHandler(logging.NullHandler())
        root.propagate = False
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(handler)
    root.setLevel(levels[level])
    root.propagate = False


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _print_matrix(name: str, M) -> None:
    print(f"{name} =")
    for row in np.atleast_2d(M):
        print("  " + " ".join(f"{x: .10g}" for x in row))


def cmd_validate(args) -> int:
    cfg = parse_scenario(args.scenario)
    g = cfg.nominal.graph
    report = validate_graph(g)
    print(report)
    print("layers: " + ", ".join(f"{i}:{l}" for i, l in sorted((report.layers or {}).items())))
    print(f"localizable: {cfg.nominal.localizable}")
    return EXIT_OK


def cmd_weights(args) -> int:
    cfg = parse_scenario(args.scenario)
    nom = cfg.nominal
    for i, w in sorted(nom.weights.items()):
        nb = nom.graph.neighbor_sets[i]
        print(f"w_{i}: " + ", ".join(f"{j}:{_fmt(x)}" for j, x in zip(nb, w)) + f"  (w_ii={_fmt(w.sum())})")
    _print_matrix("omega_fl", nom.omega_fl)
    _print_matrix("omega_ff", nom.omega_ff)
    return EXIT_OK


def _simulate_one(path: str, out: str, dt, t_end) -> str:
    cfg = parse_scenario(path)
    trace = run_scenario(cfg, dt=dt, t_end=t_end)
    write_trajectory(trace, out)
    for ev in trace.events:
        log.info("t=%.6g agent %d %s", ev.t, ev.agent, ev.event)
    return out


def cmd_simulate(args) -> int:
    src = Path(args.scenario)
    if src.is_dir():
        files = sorted(src.glob("*.toml"))
        if not files:
            raise UsageError(f"no *.toml scenarios in {src}")
        jobs = [(str(f), str(Path(args.out) / f.stem)) for f in files]
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_simulate_one, p, o, args.dt, args.t_end) for p, o in jobs]
            for fut in futures:
                print(f"wrote {fut.result()}")
        return EXIT_OK
    if not src.exists():
        raise UsageError(f"no such scenario: {src}")
    print(f"wrote {_simulate_one(str(src), args.out, args.dt, args.t_end)}")
    return EXIT_OK


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise UsageError(f"{path} is empty")
    return [c.strip() for c in rows[0]], rows[1:]


def read_measurement_table(path, kind: MeasurementKind, follower: int | None = None, neighbors=None):
    """Build a snapshot from a CSV measurement table.

    Layouts by kind (header row required):

    * relative_position, bearing: ``from,to,x1,...,xd`` (vector sensed by
      ``from`` towards ``to``, in the sensing agent's frame)
    * distance, ratio: ``from,to,value``
    * angle: ``vertex,b,c,value`` (radians)

    The follower defaults to the first row's sensing agent; its designated
    neighbors default to the order in which they appear in its own rows.
    """
    header, rows = _read_rows(path)
    k = kind.kind
    try:
        if k is Kind.ANGLE:
            if header[:4] != ["vertex", "b", "c", "value"]:
                raise UsageError("angle tables need the header vertex,b,c,value")
            recs = [(int(r[0]), int(r[1]), int(r[2]), float(r[3])) for r in rows]
        else:
            if header[:2] != ["from", "to"]:
                raise UsageError("tables need a header starting with from,to")
            recs = [(int(r[0]), int(r[1]), np.array([float(x) for x in r[2:]])) for r in rows]
    except (ValueError, IndexError) as exc:
        raise UsageError(f"malformed row in {path}: {exc}") from exc
    if not recs:
        raise UsageError(f"{path} has no data rows")
    i = recs[0][0] if follower is None else follower
    if neighbors is None:
        seen: list[int] = []
        for rec in recs:
            if rec[0] != i:
                continue
            for x in rec[1:-1]:
                if x != i and x not in seen:
                    seen.append(x)
        neighbors = tuple(seen)
    neighbors = tuple(neighbors)
    own, inter = {}, {}
    if k is Kind.ANGLE:
        for a, b, c, v in recs:
            (own if a == i else inter)[(a, b, c)] = v
    else:
        for a, b, v in recs:
            val = float(v[0]) if k in (Kind.DISTANCE, Kind.RATIO) else v
            if a == i:
                own[b] = val
            else:
                inter[(a, b)] = val
        missing = [j for j in neighbors if j not in own]
        if missing:
            raise UsageError(f"follower {i} has no measurement of neighbors {missing}")
    reference = (neighbors[0], neighbors[1]) if k is Kind.RATIO else None
    return MeasurementSnapshot(i, 0.0, kind, neighbors, own, inter, {}, reference)


def cmd_solve_h(args) -> int:
    try:
        kind = MeasurementKind(args.kind, args.frame)
    except FormctlError as exc:
        raise UsageError(str(exc)) from exc
    nbrs = None if args.neighbors is None else [int(x) for x in args.neighbors.split(",")]
    snap = read_measurement_table(args.input, kind, args.follower, nbrs)
    h = solve_displacement(snap)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["neighbor", "h", "ratio"])
    for j, x, c in zip(h.neighbors, h.coefficients, h.ratios if h.localizable else [float("nan")] * len(h.neighbors)):
        w.writerow([j, _fmt(x), _fmt(c)])
    return EXIT_OK


def cmd_mds(args) -> int:
    try:
        M = np.loadtxt(args.input, delimiter=",", ndmin=2, comments="#")
    except ValueError as exc:
        raise UsageError(f"cannot read matrix from {args.input}: {exc}") from exc
    q = mds_embed(M, args.dim, strict=not args.clamp)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["point"] + [f"x{k}" for k in range(1, args.dim + 1)])
    for p, col in enumerate(q.T, start=1):
        w.writerow([p] + [_fmt(x) for x in col])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="formctl", description="Distributed localization and formation maneuver control.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("validate", help="graph and localizability report")
    s.add_argument("scenario")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("weights", help="print nominal weights and follower matrices")
    s.add_argument("scenario")
    s.set_defaults(func=cmd_weights)

    s = sub.add_parser("simulate", help="run a scenario (or every *.toml in a directory) and write CSV logs")
    s.add_argument("scenario")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--dt", type=float, default=None, help="override the step size")
    s.add_argument("--t-end", type=float, default=None, help="override the final time")
    s.add_argument("--jobs", type=int, default=None, help="parallel workers for a directory")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("solve-h", help="displacement constraint from a measurement table")
    s.add_argument("--kind", required=True, choices=[k.value for k in Kind])
    s.add_argument("--frame", default="global", choices=["global", "local"])
    s.add_argument("--input", required=True)
    s.add_argument("--follower", type=int, default=None)
    s.add_argument("--neighbors", default=None, help="comma-separated designated neighbors")
    s.set_defaults(func=cmd_solve_h)

    s = sub.add_parser("mds", help="embed a squared-distance matrix")
    s.add_argument("--input", required=True)
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--clamp", action="store_true", help="clamp negative eigenvalues instead of failing")
    s.set_defaults(func=cmd_mds)
    return p


def main(argv=None) -> int:
    try:
        _configure_logging()
        args = build_parser().parse_args(argv)
        if getattr(args, "dt", None) is not None and not args.dt > 0:
            raise UsageError("--dt must be positive")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ValidationError, ScheduleExhausted) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FormctlError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
