import json

import pytest

from qfl import cli
from qfl.errors import ConfigError


def test_defaults():
    cfg = cli.parse_config("")
    assert cfg == cli.RunConfig()
    assert (cfg.y_max, cfg.tol, cfg.c, cfg.d1, cfg.E, cfg.T, cfg.dt, cfg.seed) == \
        (8.0, 1e-10, 1.0, 0.0, 1.0, 100.0, 1e-3, 42)


def test_single_key():
    cfg = cli.parse_config("# comment\nc = 2.5   # trailing\n\n")
    assert cfg.c == 2.5
    assert cfg.tol == 1e-10 and cfg.E == 1.0


@pytest.mark.parametrize("text,key", [
    ("tol = 1", "tol"),
    ("colour = red", "colour"),
    ("dt = fast", "dt"),
    ("seed = 1.5", "seed"),
    ("y_max = 40", "y_max"),
    ("format = xml", "format"),
    ("E = nan", "E"),
])
def test_rejects(text, key):
    with pytest.raises(ConfigError) as err:
        cli.parse_config(text)
    assert err.value.key == key


def test_overrides_win():
    cfg = cli.parse_config("c = 2\n", {"c": "3", "seed": 7})
    assert cfg.c == 3.0 and cfg.seed == 7


def test_json_floats():
    text = cli.to_json({"a": 1.0, "b": 0.1, "c": [1e-20, float("nan")], "d": 3})
    doc = json.loads(text)
    assert doc == {"a": 1.0, "b": 0.1, "c": [1e-20, None], "d": 3}
    assert '"a": 1.0' in text and "0.10000000000000001" in text


def test_ode_table(tmp_path):
    assert cli.main(["ode", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "psi_table.csv").read_text().splitlines()
    assert lines[0].startswith("# qfl ")
    assert lines[1].startswith("# config:")
    rows = [list(map(float, l.split(","))) for l in lines[3:]]
    assert [0.0, 0.0, 1.0, 0.0] in rows
    report = json.loads((tmp_path / "ode_report.json").read_text())
    assert report["schema_version"] == 1
    assert report["provenance"]["version"]


def test_flow_below_max_potential(tmp_path):
    code = cli.main(["flow", "--system", "S1", "--E", "0.3", "--T", "1", "--out", str(tmp_path)])
    assert code == 0
    doc = json.loads((tmp_path / "drift_summary.json").read_text())
    assert "jacobi_metric_degenerate" in doc["flags"]


def test_error_record(tmp_path, capsys):
    code = cli.main(["flow", "--system", "S1", "--E", "-5", "--T", "1", "--out", str(tmp_path)])
    assert code != 0
    doc = json.loads((tmp_path / "error.json").read_text())
    assert doc["error"]["code"] == "no_room"


def test_config_error_record(capsys):
    assert cli.main(["ode", "--tol", "1"]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["key"] == "tol"


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("QFL_OUT_DIR", str(tmp_path / "env"))
    assert cli.main(["verify"]) == 0
    assert (tmp_path / "env" / "verify_report.json").exists()


def test_deterministic(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["integral", "--out", str(tmp_path / d), "--format", "json"]) == 0
    for name in ("integral_report.json", "pde_residual_fam1.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_metric_outputs(tmp_path):
    assert cli.main(["metric", "--c", "1.5", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "metric_report.json").read_text())
    assert doc["metrics"]["FAM1"]["descriptor"]["c"] == 1.5
    assert doc["metrics"]["FAM1"]["witness"] is not None
