import csv
import json
from importlib import resources

import pytest

from phs_lab.cli import main

from conftest import run_cli

CONFIGS = resources.files("phs_lab") / "configs"

BLOWUP = """
[model]
type = linear
hamiltonian = -1
structure = 0
dissipation = 1
input_map = 1

[simulation]
x0 = 1
t_end = 60
step = 0.01
"""


def cfg(name):
    return str(CONFIGS / name)


def test_shipped_configs_are_packaged():
    names = {p.name for p in CONFIGS.iterdir()}
    for name in ("gas_piston_carnot.cfg", "actuator_carnot.cfg", "router.cfg", "msd.cfg", "ida_pbc.cfg"):
        assert name in names


def test_storage_lmi_json(capsys):
    assert main(["storage-lmi", "--m", "2", "--k", "3", "--d", "1"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["Q"] == [[3.0, 0.0], [0.0, 0.5]]
    assert report["unique"] is True


def test_storage_lmi_rejects_bad_parameters(capsys):
    assert main(["storage-lmi", "--m", "2", "--k", "3", "--d", "0"]) == 2
    assert "config error" in capsys.readouterr().err


def test_simulate_writes_csv_and_json(tmp_path):
    out, series = tmp_path / "r.json", tmp_path / "r.csv"
    assert main(["simulate", "--config", cfg("msd.cfg"), "--out", str(out), "--csv", str(series),
                 "--csv-stride", "1000"]) == 0
    report = json.loads(out.read_text())
    assert report["steps"] == 20000
    assert abs(report["balance_residual"]) < 1e-10
    with open(series, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "q", "p", "force", "velocity", "H", "E_port1", "phase"]
    assert len(rows) == 1 + 21
    assert float(rows[-1][0]) == 20.0
    # values are written with 17 significant digits
    for value in rows[2][:-1]:
        assert format(float(value), ".17g") == value


def test_outputs_are_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    configs = [cfg("msd.cfg"), cfg("linear_example.cfg")]
    assert main(["simulate", "--config", *configs, "--out-dir", str(a)]) == 0
    assert main(["simulate", "--config", *configs, "--out-dir", str(b), "--jobs", "2"]) == 0
    for name in ("msd.json", "msd.csv", "linear_example.json", "linear_example.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_several_configs_need_out_dir(capsys):
    assert main(["simulate", "--config", cfg("msd.cfg"), cfg("linear_example.cfg"), "--out", "x.json"]) == 2


def test_missing_key_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text(BLOWUP.replace("hamiltonian = -1\n", ""))
    assert main(["simulate", "--config", str(path)]) == 2
    assert "missing key 'hamiltonian'" in capsys.readouterr().err


def test_blow_up_exit_code(tmp_path, capsys):
    path = tmp_path / "blowup.cfg"
    path.write_text(BLOWUP)
    assert main(["simulate", "--config", str(path)]) == 3
    assert "blew up" in capsys.readouterr().err


def test_failing_audit_exit_code(capsys):
    assert main(["ida-pbc", "--samples", "20", "--tol", "1e-20"]) == 4
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] is False


def test_module_entry_point_and_bad_seed():
    ok = run_cli("storage-lmi", "--m", "1", "--k", "1", "--d", "1")
    assert ok.returncode == 0, ok.stderr
    assert json.loads(ok.stdout)["Q"] == [[1.0, 0.0], [0.0, 1.0]]
    bad = run_cli("storage-lmi", "--m", "1", "--k", "1", "--d", "1", "--audit", "2",
                  env={"PHS_LAB_SEED": "not-a-seed"})
    assert bad.returncode == 2
    assert "PHS_LAB_SEED" in bad.stderr


def test_numpy_fallback_matches_kernels(tmp_path):
    outs = {}
    for flag in ("0", "1"):
        out = tmp_path / f"r{flag}.json"
        res = run_cli("simulate", "--config", cfg("linear_example.cfg"), "--out", out,
                      env={"PHS_LAB_DISABLE_NUMBA": flag})
        assert res.returncode == 0, res.stderr
        outs[flag] = json.loads(out.read_text())
    assert outs["0"].keys() == outs["1"].keys()
    for key, value in outs["0"].items():
        if isinstance(value, float):
            assert outs["1"][key] == pytest.approx(value, rel=1e-12, abs=1e-15)
