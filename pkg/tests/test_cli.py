import subprocess
import sys

import numpy as np
import pytest

from formctl.cli import main
from formctl.scenario import bundled_scenario_path

SCENARIO = str(bundled_scenario_path())


def test_validate(capsys):
    assert main(["validate", SCENARIO]) == 0
    out = capsys.readouterr().out
    assert "graph valid" in out and "localizable: True" in out


def test_weights(capsys):
    assert main(["weights", SCENARIO]) == 0
    out = capsys.readouterr().out
    assert "omega_fl" in out and "omega_ff" in out and "w_4" in out


def test_usage_errors(capsys):
    assert main([]) == 1
    assert main(["bogus"]) == 1
    assert main(["simulate", SCENARIO]) == 1  # --out missing
    assert main(["validate", "/nonexistent/file.toml"]) == 1


def test_validation_failure(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text(bundled_scenario_path().read_text().replace("[5, 3], ", ""))
    assert main(["validate", str(bad)]) == 2


@pytest.mark.filterwarnings("ignore::formctl.errors.RankDeficientWarning")
def test_numerical_failure(tmp_path, capsys):
    m = tmp_path / "m.csv"
    m.write_text("0,1,9\n1,0,1\n9,1,0\n")
    assert main(["mds", "--input", str(m)]) == 3
    assert main(["mds", "--input", str(m), "--clamp"]) == 0


def test_simulate_with_overrides(tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", SCENARIO, "--out", str(out), "--dt", "0.01", "--t-end", "1.0"]) == 0
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert len(lines) == 1 + 5 * 101
    assert (out / "events.csv").exists() and (out / "summary.csv").exists()


def test_simulate_directory_fan_out(tmp_path):
    src = tmp_path / "scenarios"
    src.mkdir()
    text = bundled_scenario_path().read_text()
    (src / "a.toml").write_text(text)
    (src / "b.toml").write_text(text.replace("p0 = [[2.0, 0.0]", "p0 = [[2.5, 0.0]"))
    out = tmp_path / "out"
    assert main(["simulate", str(src), "--out", str(out), "--dt", "0.02", "--t-end", "0.2", "--jobs", "2"]) == 0
    assert (out / "a" / "trajectory.csv").exists() and (out / "b" / "trajectory.csv").exists()


def test_solve_h_relative_positions(tmp_path, capsys):
    table = tmp_path / "rp.csv"
    # follower 4 of the passage formation at its nominal position
    table.write_text("from,to,x,y\n4,1,6,-2\n4,2,3,0\n4,3,3,-4\n")
    assert main(["solve-h", "--kind", "relative_position", "--input", str(table)]) == 0
    rows = [r.split(",") for r in capsys.readouterr().out.splitlines()[1:]]
    ratios = np.array([float(r[2]) for r in rows])
    assert np.allclose(ratios, [-1.0, 1.5, 0.5])


def test_solve_h_distances(tmp_path, capsys):
    P = {4: np.array([-4.0, 3.0]), 1: np.array([2.0, 1.0]), 2: np.array([-1.0, 3.0]), 3: np.array([-1.0, -1.0])}
    rows = ["from,to,value"]
    for j in (1, 2, 3):
        rows.append(f"4,{j},{float(np.linalg.norm(P[j] - P[4]))!r}")
    for a, b in ((1, 2), (1, 3), (2, 3)):
        rows.append(f"{a},{b},{float(np.linalg.norm(P[a] - P[b]))!r}")
    table = tmp_path / "d.csv"
    table.write_text("\n".join(rows) + "\n")
    assert main(["solve-h", "--kind", "distance", "--input", str(table)]) == 0
    out = capsys.readouterr().out.splitlines()[1:]
    ratios = np.array([float(r.split(",")[2]) for r in out])
    assert np.allclose(ratios, [-1.0, 1.5, 0.5], atol=1e-9)


def test_solve_h_rejects_local_distance(tmp_path):
    table = tmp_path / "d.csv"
    table.write_text("from,to,value\n4,1,1\n")
    assert main(["solve-h", "--kind", "distance", "--frame", "local", "--input", str(table)]) == 1


def test_mds(tmp_path, capsys):
    m = tmp_path / "sq.csv"
    m.write_text("0,1,2,1\n1,0,1,2\n2,1,0,1\n1,2,1,0\n")
    assert main(["mds", "--input", str(m)]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "point,x1,x2" and len(rows) == 5


def test_log_env(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv("FORMCTL_LOG", "loud")
    assert main(["validate", SCENARIO]) == 1
    monkeypatch.setenv("FORMCTL_LOG", "info")
    assert main(["simulate", SCENARIO, "--out", str(tmp_path), "--dt", "0.01", "--t-end", "1.0"]) == 0
    assert "arrived" in capsys.readouterr().err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "formctl", "validate", SCENARIO], capture_output=True, text=True)
    assert res.returncode == 0 and "graph valid" in res.stdout
