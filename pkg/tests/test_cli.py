import json
import os

import jsonschema
import pytest

from slitlab.cli import REPORT_SCHEMA, SOLVER_SCHEMA, SUBCOMMANDS, main, to_csv, to_json

FAST = {
    "solve-signorini": "h: 0.03125\nradii: [0.2, 0.3, 0.4, 0.5]\n",
    "solve-degenerate": "h: 0.03125\n",
    "frequency": "h: 0.0078125\n",
    "campanato": "h: 0.015625\n",
    "harnack": "h: 0.015625\n",
    "verify-inequalities": "h: 0.03125\nsamples: 8\n",
}


def run_cli(tmp_path, cmd, text, name="cfg", extra=()):
    cfg = tmp_path / f"{name}.yaml"
    cfg.write_text(text)
    out = tmp_path / name
    code = main([cmd, "--config", str(cfg), "--out", str(out), *extra])
    files = {f: (out / f).read_bytes() for f in sorted(os.listdir(out))} if out.exists() else {}
    return code, files


def test_subcommand_table():
    assert set(SUBCOMMANDS) == {"solve-signorini", "solve-degenerate", "frequency", "campanato", "harnack",
                                "verify-inequalities", "pipeline-c2alpha"}


@pytest.mark.parametrize("cmd", sorted(FAST))
def test_smoke_runs_pass_and_validate(tmp_path, cmd):
    code, files = run_cli(tmp_path, cmd, FAST[cmd])
    assert code == 0, files
    assert files
    for name, raw in files.items():
        if name == "report.json":
            jsonschema.validate(json.loads(raw), REPORT_SCHEMA)
        elif name == "solver.json":
            jsonschema.validate(json.loads(raw), SOLVER_SCHEMA)
        else:
            assert name.endswith(".csv")
            lines = raw.decode().splitlines()
            assert len(lines) >= 2 and "nan" not in raw.decode().lower()


@pytest.mark.parametrize("cmd", ["verify-inequalities", "campanato", "solve-signorini"])
def test_outputs_are_byte_identical_across_runs_and_threads(tmp_path, monkeypatch, cmd):
    monkeypatch.setenv("SLITLAB_THREADS", "1")
    _, a = run_cli(tmp_path, cmd, FAST[cmd], "one")
    monkeypatch.setenv("SLITLAB_THREADS", "4")
    _, b = run_cli(tmp_path, cmd, FAST[cmd], "four")
    _, c = run_cli(tmp_path, cmd, FAST[cmd], "again")
    assert a == b == c


def test_malformed_config_exits_2(tmp_path, capsys):
    code, files = run_cli(tmp_path, "frequency", "h: 0.03125\nalpha: [\n")
    assert code == 2 and not files
    assert "line" in capsys.readouterr().err


def test_invalid_value_exits_2_with_line(tmp_path, capsys):
    code, _ = run_cli(tmp_path, "frequency", "n: 1\nh: 0.1\n")
    assert code == 2
    assert "line 2" in capsys.readouterr().err


def test_missing_config_file_exits_2(tmp_path):
    assert main(["frequency", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_bad_flag_h_exits_2(tmp_path):
    assert main(["frequency", "--h", "0.1", "--out", str(tmp_path / "o")]) == 2


def test_failing_check_exits_1(tmp_path):
    code, files = run_cli(tmp_path, "frequency", "h: 0.0078125\ntolerances:\n  frequency: 0.0\n"
                          "radii: [0.1, 0.2, 0.3, 0.4, 0.5]\ndata: xi\n")
    # the sampled profile of xi dips by about 4e-3, above a zero tolerance
    assert code == 1
    assert json.loads(files["report.json"])["pass"] is False


def test_config_h_overrides_flag(tmp_path):
    _, files = run_cli(tmp_path, "solve-degenerate", "h: 0.03125\n", extra=("--h", "0.015625"))
    assert json.loads(files["solver.json"])["h"] == pytest.approx(1 / 32, rel=0.01)


def test_json_and_csv_helpers():
    import numpy as np

    assert to_json({"b": np.float64(1.5), "a": np.array([np.inf, 2]), "c": np.bool_(True)}) == \
        '{\n  "a": [\n    null,\n    2.0\n  ],\n  "b": 1.5,\n  "c": true\n}\n'
    assert to_csv(["x", "ok"], [(0.1, True), (2, False)]) == "x,ok\n0.1,true\n2,false\n"


def test_pipeline_subcommand(tmp_path):
    text = "n: 2\ncoefficients:\n  type: perturbed\n  eps0: 0.05\n  seed: 0\n"
    code, files = run_cli(tmp_path, "pipeline-c2alpha", text)
    rep = json.loads(files["report.json"])
    jsonschema.validate(rep, REPORT_SCHEMA)
    assert code == 0 and rep["pass"] and rep["stage"] == "complete"
    assert rep["exponents"]["dgamma_holder"] >= 0.25


def test_pipeline_rejects_n1(tmp_path):
    code, _ = run_cli(tmp_path, "pipeline-c2alpha", "n: 1\n")
    assert code == 2
