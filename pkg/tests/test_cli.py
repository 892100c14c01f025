import csv
import json
import math

import numpy as np
import pytest

from contact_thermo import checks
from contact_thermo.cli import EXIT_CHECK, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, OUT_ENV, main
from contact_thermo.flow import Event, Trajectory
from contact_thermo.io import fmt, read_csv, read_trajectory_csv, write_csv, write_manifest
from contact_thermo.models import moebius_closed_form


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


# exit codes ------------------------------------------------------------------


def test_check_passes(tmp_path, capsys):
    code, out = run(tmp_path, "check", "--points", "100")
    assert code == EXIT_OK
    lines = [ln for ln in capsys.readouterr().out.splitlines() if ln.startswith(("PASS", "FAIL"))]
    assert lines and all(ln.startswith("PASS") for ln in lines)
    with open(out / "check.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["passed"] for r in rows} == {"1"}
    assert {r["name"] for r in rows if r["suite"] == "lambda_preservation"} == set(checks.named_contactomorphisms())
    assert manifest(out)["failed"] == []


def test_check_failure_gives_exit_3(tmp_path, monkeypatch):
    monkeypatch.setattr(checks, "LAMBDA_TOL", -1.0)
    code, out = run(tmp_path, "check", "--points", "20")
    assert code == EXIT_CHECK
    assert len(manifest(out)["failed"]) == len(checks.named_contactomorphisms())


@pytest.mark.parametrize("argv", [
    ["flow", "--model", "moebius", "--t", "1"],  # missing --x0
    ["flow", "--model", "moebius", "--x0", "1,2", "--t", "1"],
    ["flow", "--model", "bogus", "--x0", "0,0,0", "--t", "1"],
    ["flow", "--model", "expr", "--expr", "__import__('os')", "--x0", "0,0,0", "--t", "1"],
    ["cooling", "--variant", "sine", "--a", "1", "--eps", "0.5", "--N", "2"],
    ["glauber", "--engine", "master", "--n", "20"],
    ["moebius", "--unknown-flag", "1"],
])
def test_usage_errors_give_exit_1(tmp_path, argv, capsys):
    code, _ = run(tmp_path, *argv)
    assert code == EXIT_USAGE
    err = capsys.readouterr().err.strip()
    assert len(err.splitlines()) == 1 or err.splitlines()[-1].startswith("contact-thermo")


def test_non_finite_flow_gives_exit_2(tmp_path):
    with np.errstate(all="ignore"):
        code, out = run(tmp_path, "flow", "--model", "expr", "--expr", "log(z)", "--x0", "0,0,-1", "--t", "1")
    assert code == EXIT_NUMERIC
    assert manifest(out)["status"] == "failed"


# outputs -----------------------------------------------------------------------


def test_moebius_flow_matches_closed_form(tmp_path):
    code, out = run(tmp_path, "flow", "--model", "moebius", "--x0", "0.5,0,0", "--t", "3")
    assert code == EXIT_OK
    traj = read_trajectory_csv(out / "trajectory.csv")
    w = moebius_closed_form(0.5j, traj.times)
    np.testing.assert_allclose(traj.z, w.real, atol=1e-6)
    np.testing.assert_allclose(traj.p[:, 0], w.imag, atol=1e-6)


@pytest.mark.parametrize("argv", [
    ["moebius", "--t", "2", "--samples", "11"],
    ["cooling", "--t", "2", "--samples", "11"],
    ["equilibrium", "--b", "6", "--beta", "1", "--samples", "64"],
    ["glauber", "--engine", "lumped", "--n", "8", "--t-max", "1", "--samples", "5"],
])
def test_exactly_one_manifest(tmp_path, argv):
    code, out = run(tmp_path, *argv)
    assert code == EXIT_OK
    assert [p.name for p in out.glob("*.json")] == ["manifest.json"]
    doc = manifest(out)
    assert doc["command"] == argv[0]
    assert sorted(p.name for p in out.iterdir() if p.name != "manifest.json") == doc["outputs"]


def test_seeded_monte_carlo_is_bit_reproducible(tmp_path):
    argv = ["glauber", "--engine", "gillespie", "--n", "6", "--runs", "50", "--t-max", "1", "--samples", "6",
            "--seed", "7"]
    _, a = run(tmp_path, *argv, name="a")
    _, b = run(tmp_path, *argv, name="b")
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()
    _, c = run(tmp_path, *argv[:-1], "8", name="c")
    assert (a / "summary.csv").read_bytes() != (c / "summary.csv").read_bytes()


def test_lumped_and_master_engines_agree(tmp_path):
    common = ["--n", "6", "--t-max", "2", "--samples", "9", "--m0", "0.333333333333"]
    _, lumped = run(tmp_path, "glauber", "--engine", "lumped", *common, name="lumped")
    _, master = run(tmp_path, "glauber", "--engine", "master", *common, name="master")
    _, A, _ = read_csv(lumped / "summary.csv")
    _, B, _ = read_csv(master / "summary.csv")
    np.testing.assert_allclose(A[:, 1], B[:, 1], atol=1e-8)


def test_config_file_is_read_and_flags_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# cooling run\nvariant = isentropic\nt = 2.5\nsamples = 6\nx0 = 0.5,-0.2,0.1\n")
    code, out = run(tmp_path, "cooling", "--config", str(cfg), "--samples", "4")
    assert code == EXIT_OK
    params = manifest(out)["parameters"]
    assert params["variant"] == "isentropic"
    assert params["t"] == 2.5
    assert params["samples"] == 4
    assert params["x0"] == [0.5, -0.2, 0.1]


def test_bad_config_line_is_a_usage_error(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("just words\n")
    assert main(["cooling", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_output_directory_from_environment(tmp_path, monkeypatch):
    target = tmp_path / "from_env"
    monkeypatch.setenv(OUT_ENV, str(target))
    assert main(["moebius", "--t", "1", "--samples", "5"]) == EXIT_OK
    assert (target / "manifest.json").is_file()
    assert (target / "trajectory.csv").is_file()


def test_negative_values_are_accepted(tmp_path):
    code, out = run(tmp_path, "flow", "--model", "minus_cz", "--x0", "-1,-2,-0.5", "--t", "1", "--samples", "3")
    assert code == EXIT_OK
    traj = read_trajectory_csv(out / "trajectory.csv")
    assert traj.z[-1] == pytest.approx(-0.5 * math.exp(-1), abs=1e-9)


# io ----------------------------------------------------------------------------


def test_fmt_round_trips_doubles(rng):
    for v in rng.normal(size=200) * 10.0 ** rng.integers(-300, 300, 200):
        assert float(fmt(v)) == v
    assert fmt(None) == "" and fmt(float("nan")) == "" and fmt(True) == "1" and fmt(np.int64(3)) == "3"


def test_csv_round_trip(tmp_path, rng):
    X = rng.normal(size=(10, 3))
    X[2, 1] = np.nan
    path = write_csv(tmp_path / "sub" / "x.csv", ["a", "b", "c"], X, comments=["#note,1"])
    header, Y, comments = read_csv(path)
    assert header == ["a", "b", "c"]
    np.testing.assert_array_equal(Y, X)
    assert comments == ["#note,1"]
    assert b"\r" not in path.read_bytes()


def test_trajectory_round_trip_keeps_events(tmp_path):
    t = np.linspace(0, 1, 4)
    traj = Trajectory(t, np.column_stack([t, t ** 2, -t]), [Event(0.5, "hit", {"index": 1, "x": [0.1, 0.2]})], 1)
    back = read_trajectory_csv(traj.to_csv(tmp_path / "t.csv"))
    np.testing.assert_array_equal(back.points, traj.points)
    assert back.events[0].kind == "hit" and back.events[0].payload == {"index": 1, "x": [0.1, 0.2]}


def test_manifest_contents(tmp_path):
    path = write_manifest(tmp_path, "demo", {"x": np.float64(1.5)}, [str(tmp_path / "b.csv"), "a.csv"], seed=3,
                          started=0.0)
    doc = json.loads(path.read_text())
    assert doc["outputs"] == ["a.csv", "b.csv"]
    assert doc["parameters"] == {"x": 1.5}
    assert doc["seed"] == 3 and doc["version"] == "0.1.0"
