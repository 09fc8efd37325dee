import csv
import json
import os
import subprocess
import sys

import pytest

from nlsbirkhoff.cli import ConfigError, RunConfig, main


def _run(tmp_path, sub, cfg, name="run"):
    out = tmp_path / name
    p = tmp_path / f"{name}.json"
    p.write_text(json.dumps(cfg))
    code = main([sub, "--config", str(p), "--out", str(out)])
    return code, out


def test_config_validation():
    RunConfig().validate()
    for bad in ({"N": 4}, {"J": 3, "J_op": 2}, {"p": 3.0}, {"rho": [0.2]}, {"dt": 0.0}):
        with pytest.raises(ConfigError):
            RunConfig.from_dict(bad)
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"unknown_key": 1})


def test_invalid_config_exits_2(tmp_path, capsys):
    code, _ = _run(tmp_path, "spectrum", {"N": 4})
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["status"] == "error"


def test_zero_state_spectrum(tmp_path):
    code, out = _run(tmp_path, "spectrum", {"J": 2, "state": "zero", "rho": [0.01]})
    assert code == 0
    rows = list(csv.DictReader(open(out / "spectrum_0.csv")))
    assert len(rows) == 5
    man = json.loads((out / "manifest.json").read_text())
    assert man["subcommand"] == "spectrum"
    assert man["results"][0]["max_gap"] == 0.0
    assert {"config_hash", "git-ref", "versions", "wall_time"} <= set(man)


def test_spectrum_is_deterministic(tmp_path):
    cfg = {"J": 2, "rho": [0.01, 0.02], "seed": 7}
    _, a = _run(tmp_path, "spectrum", cfg, "a")
    _, b = _run(tmp_path, "spectrum", cfg, "b")
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    for m in (ma, mb):
        m.pop("wall_time")
        m["config"].pop("out")
    assert ma == mb
    assert (a / "spectrum_1.json").read_text() == (b / "spectrum_1.json").read_text()


def test_psi_normalize_dynamics_chain(tmp_path):
    base = {"J": 1, "N": 3, "rho": [0.01], "samples": 3, "cache_dir": str(tmp_path / "cache")}
    code, psi_out = _run(tmp_path, "psi", base, "psi")
    assert code == 0
    assert (psi_out / "psi.json").exists() and (psi_out / "kernels_n3.json").exists()
    code, nf_out = _run(tmp_path, "normalize", {**base, "psi_file": str(psi_out / "psi.json")}, "nf")
    assert code == 0
    nf = json.loads((nf_out / "normal_form.json").read_text())
    assert nf["defects"]["solvability"] < 1e-12
    dyn_cfg = {**base, "T": 0.5, "stride": 50, "psi_tilde_file": str(nf_out / "psi_tilde.json")}
    code, dyn_out = _run(tmp_path, "dynamics", dyn_cfg, "dyn")
    assert code == 0
    header = next(csv.reader(open(dyn_out / "trajectory_0.csv")))
    assert "I_0" in header
    res = json.loads((dyn_out / "manifest.json").read_text())["results"][0]
    assert res["energy_drift"] < 1e-10


def test_certify_weights(tmp_path):
    cfg = {"cases": [{"case": "i", "s": 1.0, "a": 0.0}, {"case": "ii", "s": 0.0}],
           "n_set": [3], "K_max": 8, "j_max": 8}
    code, out = _run(tmp_path, "certify-weights", cfg)
    assert code == 0
    rows = json.loads((out / "weights.json").read_text())
    assert len(rows) == 2 and all(r["passed"] for r in rows)


def test_accept_subset(tmp_path, capsys):
    code, out = _run(tmp_path, "accept", {"criteria": [3, 9]})
    assert code == 0
    lines = (out / "acceptance.txt").read_text().splitlines()
    assert len(lines) == 2 and all("PASS" in ln for ln in lines)


def test_module_entry_point_without_numba(tmp_path):
    env = dict(os.environ, NLSBIRKHOFF_NO_NUMBA="1")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"J": 1, "rho": [0.01]}))
    r = subprocess.run([sys.executable, "-m", "nlsbirkhoff", "spectrum", "--config", str(cfg),
                        "--out", str(tmp_path / "o")], env=env, capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["versions"]["backend"] == "numpy"
