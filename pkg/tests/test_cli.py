import json
import subprocess
import sys

import pytest

from cmlab.cli import main, parse_complex


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip().startswith("{") else out)


def test_parse_complex():
    assert parse_complex("0.3+0.1i") == 0.3 + 0.1j
    assert parse_complex("i") == 1j and parse_complex("-i") == -1j
    assert parse_complex([1, 2]) == 1 + 2j


def test_elliptic_check(capsys):
    code, rep = run(capsys, "elliptic-check", "--lattice", "0.5,0.5i", "--tol", "1e-10")
    assert code == 0 and rep["passed"]
    assert all(c["passed"] for c in rep["checks"])
    assert len(rep["checks"]) > 20


def test_simulate_repulsive(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    code, rep = run(capsys, "simulate", "--system", "A:2", "--c", "1i", "--x", "0.31,0.17", "--p", "0.2,-0.4",
                    "--T", "10", "--out", str(out))
    assert code == 0 and rep["energy_drift"] < 1e-8
    lines = out.read_text().splitlines()
    assert lines[0] == "t,x1,x2,p1,p2,H"
    t = [float(l.split(",")[0]) for l in lines[1:]]
    assert all(b > a for a, b in zip(t, t[1:])) and t[-1] == 10.0


def test_simulate_attractive_collides(tmp_path, capsys):
    # a real coupling attracts; this initial condition reaches a wall at t ~ 0.03
    out = tmp_path / "traj.csv"
    code, rep = run(capsys, "simulate", "--system", "A:2", "--c", "1.0", "--x", "0.31,0.17", "--p", "0.2,-0.4",
                    "--T", "10", "--out", str(out))
    assert code == 1
    assert rep["violated"]["invariant"] == "wall_proximity"
    assert 0 < rep["violated"]["value"]["t"] < 0.1
    assert out.read_text().splitlines()[0] == "t,x1,x2,p1,p2,H"


def test_simulate_jsonl(tmp_path, capsys):
    out = tmp_path / "traj.jsonl"
    code, rep = run(capsys, "simulate", "--system", "B:2", "--c", "0.6i,0.9i", "--T", "1", "--n-samples", "11",
                    "--format", "jsonl", "--out", str(out))
    assert code == 0
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(rows) == 12


def test_lax_verify_a2(capsys):
    code, rep = run(capsys, "lax-verify", "--system", "A:2", "--builder", "dhp", "--T", "1", "--z", "0.3+0.1i")
    assert code == 0
    assert rep["lax_residual"] < 1e-6
    assert rep["spectral"]["max_coefficient_drift"] < 1e-6
    for key in ("system", "rep", "builder", "z_samples", "constraints", "spectral"):
        assert key in rep


def test_lax_verify_bc2_example(capsys):
    # with all three BC couplings nonzero the bcs pair fails the Lax equation; the report says so
    code, rep = run(capsys, "lax-verify", "--system", "BC:2", "--rep", "vector", "--builder", "bcs", "--T", "2",
                    "--z", "0.3+0.1i")
    assert code == 1
    assert rep["violated"]["invariant"] == "lax_residual"


def test_lax_verify_bc2_without_long(capsys):
    code, rep = run(capsys, "lax-verify", "--system", "BC:2", "--rep", "vector", "--builder", "bcs", "--T", "1",
                    "--z", "0.3+0.1i", "--c", "1i,0.5i,0")
    assert code == 0 and rep["lax_residual"] < 1e-6


def test_spectral_scan(tmp_path, capsys):
    out = tmp_path / "scan.csv"
    code, rep = run(capsys, "spectral-scan", "--system", "A:2", "--z", "0.3+0.1i,0.1-0.2i", "--out", str(out))
    assert code == 0
    head = out.read_text().splitlines()[0].split(",")
    assert head[:2] == ["z_re", "z_im"]


def test_orbit_dim(capsys):
    code, rep = run(capsys, "orbit-dim", "--system", "G2:2")
    assert code == 0 and rep["dimension"] == 4
    code, rep = run(capsys, "orbit-dim", "--system", "G2:2", "--zero")
    assert code == 0 and rep["dimension"] == 0


def test_obstruction(capsys):
    code, rep = run(capsys, "obstruction-check", "--system", "D:4", "--rep", "roots", "--expect", "false")
    assert code == 0 and rep["witness"]
    code, rep = run(capsys, "obstruction-check", "--system", "D:4", "--rep", "roots", "--expect", "true")
    assert code == 1


def test_config_errors(tmp_path, capsys):
    assert main(["simulate", "--system", "E:6"]) == 2
    assert main(["elliptic-check", "--lattice", "0.5,1.0"]) == 2
    assert main(["simulate", "--c", "abc"]) == 2
    bad = tmp_path / "cfg.json"
    bad.write_text("{not json")
    assert main(["simulate", "--config", str(bad)]) == 2
    with pytest.raises(SystemExit) as e:
        main(["no-such-command"])
    assert e.value.code == 2


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"system": {"root_system": "B:2", "couplings": ["0.6i", "0.9i"]},
                               "integration": {"T": 0.5}, "seed": 3}))
    code, rep = run(capsys, "simulate", "--config", str(cfg), "--out", str(tmp_path / "a.csv"))
    assert code == 0 and rep["system"] == "B:2" and rep["seed"] == 3


def test_determinism(tmp_path):
    outs = []
    for k, threads in enumerate(("1", "4")):
        p = tmp_path / f"{k}.csv"
        r = subprocess.run([sys.executable, "-m", "cmlab.cli", "simulate", "--system", "A:3", "--T", "1",
                            "--seed", "5", "--out", str(p)], capture_output=True, env={"CM_THREADS": threads})
        assert r.returncode == 0, r.stderr
        rep = json.loads(r.stdout)
        rep.pop("output")
        outs.append((p.read_bytes(), rep))
    assert outs[0] == outs[1]


def test_lax_verify_threads_deterministic(tmp_path):
    outs = []
    for threads in ("1", "3"):
        r = subprocess.run([sys.executable, "-m", "cmlab.cli", "lax-verify", "--system", "A:2", "--T", "0.5",
                            "--n-states", "2", "--n-z", "3"], capture_output=True, env={"CM_THREADS": threads})
        outs.append(r.stdout)
    assert outs[0] == outs[1]
    assert json.loads(outs[0])["passed"]
