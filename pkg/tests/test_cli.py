import csv
import io
import json
import subprocess
import sys

import pytest

from foodchain.cli import EXIT_DOMAIN, EXIT_NUMERIC, EXIT_OK, d2_grid, dump_json, main
from foodchain.model import HOLLING_DEFAULT, IVLEV_DEFAULT, ModelParams

FAST = {"t_transient": 500.0, "t_window": 500.0}


def write_cfg(tmp_path, **blocks):
    cfg = {"model": HOLLING_DEFAULT.to_dict(), **blocks}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_ok(tmp_path, capsys):
    code, out, _ = run(capsys, "validate", "--config", write_cfg(tmp_path))
    assert code == EXIT_OK
    assert json.loads(out) == {"ok": True, "violations": {"f1": [], "f2": []}}


def test_negative_parameter_is_domain_error(tmp_path, capsys):
    cfg = HOLLING_DEFAULT.to_dict()
    cfg["f1"]["p1"] = -1.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"model": cfg}))
    code, out, err = run(capsys, "equilibria", "--config", str(path))
    assert code == EXIT_DOMAIN and out == "" and "p1" in err


@pytest.mark.parametrize("payload", ['{"model": {}, "surprise": 1}', "[1, 2]", "{not json"])
def test_malformed_configs(tmp_path, capsys, payload):
    path = tmp_path / "c.json"
    path.write_text(payload)
    code, _, _ = run(capsys, "equilibria", "--config", str(path))
    assert code == EXIT_DOMAIN


def test_missing_config_file(capsys):
    assert run(capsys, "equilibria", "--config", "/nonexistent/x.json")[0] == EXIT_DOMAIN


def test_unknown_block_key(tmp_path, capsys):
    path = write_cfg(tmp_path, simulate={"ic": [0.4, 0.4, 0.4], "tend": 5})
    assert run(capsys, "simulate", "--config", path)[0] == EXIT_DOMAIN


def test_equilibria_json(tmp_path, capsys):
    code, out, _ = run(capsys, "equilibria", "--config", write_cfg(tmp_path), "--d2", "0.1")
    data = json.loads(out)
    assert code == EXIT_OK and data["d2"] == 0.1
    kinds = [e["kind"] for e in data["equilibria"]]
    assert kinds == ["trivial", "axial", "boundary", "interior_lower", "interior_upper"]


def test_thresholds_without_classification(tmp_path, capsys):
    code, out, _ = run(capsys, "thresholds", "--config", write_cfg(tmp_path), "--no-classify")
    data = json.loads(out)
    assert code == EXIT_OK
    assert data["d2_sn"] == pytest.approx(0.1049651384, abs=1e-9)
    assert data["d2_tc"] == pytest.approx(0.0924401914, abs=1e-9)
    assert {h["criticality"] for h in data["d2_hopf"]} == {"undetermined"}


def test_simulate_csv_and_out_file(tmp_path, capsys):
    path = write_cfg(tmp_path, simulate={"ic": [0.45, 0.5, 0.8], "t_end": 10.0, "dt": 0.5})
    out_path = tmp_path / "traj.csv"
    code, out, _ = run(capsys, "simulate", "--config", path, "--d2", "0.09", "--out",
                       str(out_path))
    assert code == EXIT_OK and out == ""
    rows = list(csv.reader(out_path.open()))
    assert rows[0] == ["t", "x", "y", "z"]
    assert len(rows) == 21
    assert [float(v) for v in rows[1]] == [0.0, 0.45, 0.5, 0.8]


def test_simulate_is_deterministic(tmp_path, capsys):
    path = write_cfg(tmp_path, simulate={"t_end": 50.0})
    a = run(capsys, "simulate", "--config", path, "--d2", "0.09")[1]
    b = run(capsys, "simulate", "--config", path, "--d2", "0.09")[1]
    assert a == b


def test_sweep_csv(tmp_path, capsys):
    path = write_cfg(tmp_path, integrator=FAST,
                     sweep={"start": 0.098, "stop": 0.096, "step": 0.001, "ic_policy": "fixed"})
    code, out, _ = run(capsys, "sweep", "--config", path, "--threads", "2")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == EXIT_OK
    assert {float(r["d2"]) for r in rows} == {0.098, 0.097, 0.096}
    assert {r["kind"] for r in rows} == {"equilibrium"}


def test_sweep_threads_env_matches_flag(tmp_path, capsys, monkeypatch):
    path = write_cfg(tmp_path, integrator=FAST, sweep={"d2": [0.09, 0.086], "ic_policy": "fixed"})
    a = run(capsys, "sweep", "--config", path, "--format", "json", "--threads", "2")[1]
    monkeypatch.setenv("FOODCHAIN_THREADS", "2")
    b = run(capsys, "sweep", "--config", path, "--format", "json")[1]
    assert a == b
    monkeypatch.setenv("FOODCHAIN_THREADS", "many")
    assert run(capsys, "sweep", "--config", path)[0] == EXIT_DOMAIN


def test_sweep_grid_outside_domain(tmp_path, capsys):
    path = write_cfg(tmp_path, sweep={"d2": [0.09, 0.5]})
    assert run(capsys, "sweep", "--config", path)[0] == EXIT_DOMAIN


def test_d2_grid_inclusive_descending():
    g = d2_grid({"start": 0.105, "stop": 0.06, "step": 5e-4})
    assert len(g) == 91 and g[0] == 0.105 and g[-1] == pytest.approx(0.06)


def test_cycle_hopf_and_continuation(tmp_path, capsys):
    path = write_cfg(tmp_path, cycle={"from": "hopf", "continue_to": 0.1030, "step": 5e-4})
    code, out, _ = run(capsys, "cycle", "--config", path, "--d2", "0.1035")
    data = json.loads(out)
    assert code == EXIT_OK
    assert data["terminated"] is False and data["d2_last"] == pytest.approx(0.103)
    assert all(c["stability"] == "unstable" for c in data["branch"])


def test_cycle_boundary(tmp_path, capsys):
    path = write_cfg(tmp_path, cycle={"from": "boundary"})
    code, out, _ = run(capsys, "cycle", "--config", path, "--d2", "0.08")
    data = json.loads(out)
    assert code == EXIT_OK and data["transverse_exponent"] < 0
    assert data["period"] == pytest.approx(28.742, abs=1e-2)


def test_cycle_not_found_is_numeric_failure(tmp_path, capsys):
    # beyond the fold there is no coexistence equilibrium to start from
    path = write_cfg(tmp_path, cycle={"from": "hopf"})
    assert run(capsys, "cycle", "--config", path, "--d2", "0.106")[0] == EXIT_NUMERIC


def test_lyapunov_and_attractor(tmp_path, capsys):
    path = write_cfg(tmp_path, integrator=FAST)
    code, out, _ = run(capsys, "lyapunov", "--config", path, "--d2", "0.1")
    assert code == EXIT_OK and json.loads(out)["lyap_max"] < 0
    code, out, _ = run(capsys, "attractor", "--config", path, "--d2", "0.09")
    data = json.loads(out)
    assert code == EXIT_OK and data["kind"] == "periodic" and data["k"] == 1


def test_extinction(tmp_path, capsys):
    path = write_cfg(tmp_path, extinction={"ic": [0.5, 0.4, 0.8]})
    code, out, _ = run(capsys, "extinction", "--config", path, "--d2", "0.08")
    data = json.loads(out)
    assert code == EXIT_OK and data["verdict"] == "extinct" and data["time"] > 500


def test_fit_from_flags(capsys):
    target = json.dumps({"kind": "holling2", "p1": 0.46, "p2": 2.0})
    code, out, _ = run(capsys, "fit", "--target", target, "--family", "ivlev",
                       "--domain", "0:1", "--samples", "101")
    data = json.loads(out)
    assert code == EXIT_OK
    assert data["fitted"]["kind"] == "ivlev"
    assert data["fitted"]["p1"] == pytest.approx(0.1647, rel=1e-3)
    assert data["domain"] == [0.0, 1.0] and data["samples"] == 101


def test_fit_bad_inputs(capsys):
    assert run(capsys, "fit")[0] == EXIT_DOMAIN
    assert run(capsys, "fit", "--target", "{oops")[0] == EXIT_DOMAIN
    target = json.dumps({"kind": "holling2", "p1": 0.46, "p2": 2.0})
    assert run(capsys, "fit", "--target", target, "--domain", "1:0")[0] == EXIT_DOMAIN


def test_json_round_trip_of_model():
    text = dump_json(IVLEV_DEFAULT.to_dict())
    assert ModelParams.from_dict(json.loads(text)) == IVLEV_DEFAULT
    assert json.loads(dump_json({"v": float("nan")})) == {"v": None}


def test_console_entry_point(tmp_path):
    path = write_cfg(tmp_path)
    proc = subprocess.run([sys.executable, "-m", "foodchain.cli", "validate", "--config", path],
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["ok"] is True
