import csv
import json

import numpy as np
import pytest

from decavg.cli import main
from decavg.engine import CSV_HEADER


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def _write_cfg(tmp_path, **over):
    cfg = {
        "name": "tiny",
        "algorithms": ["dda", "adda"],
        "topology": {"kind": "cycle", "n": 4},
        "problem": {"kind": "synthetic", "m": 8, "p": 6, "sparsity": 2, "noise_sd": 0.1},
        "rounds": 50,
    }
    cfg.update(over)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def _error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


@pytest.mark.slow
def test_run_preset_case2(tmp_path, capsys):
    assert main(["run", "--config", "case2_desk", "--out", str(tmp_path)]) == 0
    for alg in ("dda", "adda", "da", "ada"):
        rows = _rows(tmp_path / "case2_desk" / f"mod_ring8_{alg}.csv")
        assert list(rows[0]) == CSV_HEADER
        err = np.array([float(r["obj_err"]) for r in rows])
        assert err[-1] < 1e-2 * err[0]


def test_run_writes_traces(tmp_path, capsys):
    assert main(["run", "--config", _write_cfg(tmp_path), "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out.split()
    assert len(out) == 2
    side = json.loads((tmp_path / "o" / "tiny" / "cycle4_adda.json").read_text())
    assert side["config"]["rounds"] == 50


def test_out_dir_from_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("DECAVG_OUT", str(tmp_path / "env"))
    assert main(["run", "--config", _write_cfg(tmp_path)]) == 0
    assert (tmp_path / "env" / "tiny" / "cycle4_dda.csv").is_file()


def test_compare_writes_table(tmp_path, capsys):
    assert main(["compare", "--config", _write_cfg(tmp_path), "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "tiny" / "cycle4_compare.csv")
    assert list(rows[0]) == ["t", "dda_obj_err", "dda_cons_err", "adda_obj_err", "adda_cons_err"]
    assert len(rows) == 51


def test_constants_keys(tmp_path, capsys):
    assert main(["constants", "--config", "theorem_bounds", "--out", str(tmp_path)]) == 0
    payload = json.loads(capsys.readouterr().out)
    entry = payload["constants"][0]
    for key in ("L", "beta", "f_star", "problem_hash"):
        assert key in entry
    for key in ("a", "rho_M", "admissible", "C", "D", "gamma", "pi_sq"):
        assert key in entry["dda"]
    for key in ("C_p", "C_g", "G"):
        assert key in entry["adda"]
    assert entry["dda"]["admissible"] is True
    assert (tmp_path / "theorem_bounds" / "constants.json").is_file()


def test_inadmissible_step_needs_force(tmp_path, capsys):
    path = _write_cfg(tmp_path, algorithms=["dda"], step=100.0)
    assert main(["run", "--config", path, "--out", str(tmp_path)]) == 2
    assert _error(capsys)["error"] == "inadmissible_step"
    assert main(["run", "--config", path, "--out", str(tmp_path), "--force"]) in (0, 3)


def test_divergence_exit_code(tmp_path, capsys):
    path = _write_cfg(tmp_path, algorithms=["dda"], step=1e4, rounds=500,
                      problem={"kind": "synthetic", "m": 8, "p": 6, "sparsity": 2, "constrained": False})
    assert main(["run", "--config", path, "--out", str(tmp_path), "--force"]) == 3
    assert _error(capsys)["error"] == "divergence"


def test_unknown_algorithm_is_schema_error(tmp_path, capsys):
    path = _write_cfg(tmp_path, algorithms=["sgd"])
    assert main(["run", "--config", path, "--out", str(tmp_path)]) == 2
    assert _error(capsys)["error"] == "schema"


def test_missing_config(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2
    assert _error(capsys)["error"] == "missing_file"


def test_bad_topology_is_validation_error(tmp_path, capsys):
    path = _write_cfg(tmp_path, topology={"kind": "mod_ring", "n": 5})
    assert main(["run", "--config", path, "--out", str(tmp_path)]) == 2
    assert _error(capsys)["error"] == "validation"


def test_seed_override_changes_data_not_schema(tmp_path, capsys):
    path = _write_cfg(tmp_path, algorithms=["dda"])
    main(["run", "--config", path, "--out", str(tmp_path / "a")])
    main(["run", "--config", path, "--out", str(tmp_path / "b"), "--seed", "7"])
    a = _rows(tmp_path / "a" / "tiny" / "cycle4_dda.csv")
    b = _rows(tmp_path / "b" / "tiny" / "cycle4_dda.csv")
    assert list(a[0]) == list(b[0]) and len(a) == len(b)
    assert a[1]["obj_err"] != b[1]["obj_err"]


def test_negative_seed_rejected(tmp_path, capsys):
    assert main(["run", "--config", _write_cfg(tmp_path), "--seed", "-1"]) == 2


def test_project_check(tmp_path, capsys):
    assert main(["project-check", "--pairs", "50", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "project_check.json").read_text())
    assert report["ok"] and report["pairs"] == 50
