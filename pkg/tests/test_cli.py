"""CLI: config validation, experiment dispatch, deterministic bundles."""

import json
from pathlib import Path

import pytest

from chernlab.cli import run_command
from chernlab.config import ConfigError, load_config, validate_config
from chernlab.reports import ResultBundle, emit_report


MARKER_CFG = """\
experiment: marker
seed: 3
model:
  family: atomic_limit
sizes: [8]
L_values: [2, 3]
output_dir: "{out}"
"""

DICHOTOMY_CFG = """\
experiment: dichotomy
seed: 5
model:
  family: haldane
  parameters: {{t1: 1.0, t2: 0.02, phi: 1.5707963267948966, mass: 3.0}}
sizes: [8, 12]
L_values: [2, 3]
island: {{bloch_band: [0, 0]}}
output_dir: "{out}"
"""

STABILITY_CFG = """\
experiment: stability
seed: 5
model:
  family: haldane
  parameters: {{t1: 1.0, t2: 0.02, phi: 1.5707963267948966, mass: 3.0}}
sizes: [10]
L_values: [2, 3]
stability: {{lambda_grid: [0.0, 0.1]}}
output_dir: "{out}"
"""


def _write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _read_tree(root):
    out = {}
    for p in sorted(Path(root).rglob("*")):
        if p.is_file():
            out[str(p.relative_to(root))] = p.read_bytes()
    return out


def test_validate_ok(tmp_path, capsys):
    cfg = _write(tmp_path, MARKER_CFG.format(out=tmp_path / "out"))
    assert run_command(["validate", "--config", cfg]) == 0
    assert "ok" in capsys.readouterr().out


def test_marker_atomic_zero_exit_zero(tmp_path):
    out = tmp_path / "out"
    cfg = _write(tmp_path, MARKER_CFG.format(out=out))
    assert run_command(["run", "--config", cfg]) == 0
    table = (out / "tables" / "tuv_sequence.csv").read_text().splitlines()
    assert table[0] == "L,t_L"
    assert all(row.split(",")[1] == "0" for row in table[1:])
    report = json.loads((out / "reports" / "marker.json").read_text())
    assert report["8"]["marker"] == 0.0


def test_malformed_sizes_exit_two(tmp_path, capsys):
    bad = MARKER_CFG.format(out=tmp_path / "out").replace("sizes: [8]", "sizes: [8, 6]")
    cfg = _write(tmp_path, bad)
    assert run_command(["run", "--config", cfg]) == 2
    assert "sizes" in capsys.readouterr().err


def test_l_values_must_be_interior(tmp_path):
    bad = MARKER_CFG.format(out=tmp_path / "out").replace("L_values: [2, 3]",
                                                          "L_values: [2, 6]")
    cfg = _write(tmp_path, bad)
    assert run_command(["run", "--config", cfg]) == 2


def test_missing_config_exit_two(tmp_path):
    assert run_command(["run", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_unknown_family_names_field(tmp_path, capsys):
    bad = MARKER_CFG.format(out=tmp_path / "out").replace("atomic_limit", "kagome")
    cfg = _write(tmp_path, bad)
    assert run_command(["run", "--config", cfg]) == 2
    assert "model" in capsys.readouterr().err


def test_dichotomy_trivial_haldane_exit_zero(tmp_path):
    out = tmp_path / "out"
    cfg = _write(tmp_path, DICHOTOMY_CFG.format(out=out))
    assert run_command(["run", "--config", cfg, "--threads", "2"]) == 0
    report = json.loads((out / "reports" / "dichotomy.json").read_text())
    assert report["verdict"] == "consistent"
    table = (out / "tables" / "tuv_sequence.csv").read_text().splitlines()
    assert table[0] == "L,t_L"
    schema = json.loads((out / "tables" / "schema.json").read_text())
    assert schema["tuv_sequence.csv"] == ["L", "t_L"]
    assert schema["mass.csv"] == ["L", "mass_out", "mass_in"]


def test_stability_run(tmp_path):
    out = tmp_path / "out"
    cfg = _write(tmp_path, STABILITY_CFG.format(out=out))
    assert run_command(["run", "--config", cfg]) == 0
    rows = (out / "tables" / "stability.csv").read_text().splitlines()
    assert rows[0] == "lambda,marker,bulk_gap"
    assert len(rows) == 3


def test_reproducible_bundles(tmp_path):
    out1 = tmp_path / "o1"
    out2 = tmp_path / "o2"
    cfg = _write(tmp_path, MARKER_CFG.format(out=out1))
    assert run_command(["run", "--config", cfg]) == 0
    assert run_command(["run", "--config", cfg, "--out", str(out2)]) == 0
    t1 = _read_tree(out1)
    t2 = _read_tree(out2)
    assert t1.keys() == t2.keys()
    assert all(t1[k] == t2[k] for k in t1)


def test_empty_bundle_manifest_only(tmp_path):
    bundle = ResultBundle(manifest={"config_hash": "x"})
    paths = emit_report(bundle, tmp_path / "empty")
    assert [Path(p).name for p in paths] == ["manifest.json"]


def test_schema_matches_headers(tmp_path):
    out = tmp_path / "out"
    cfg = _write(tmp_path, MARKER_CFG.format(out=out))
    run_command(["run", "--config", cfg])
    schema = json.loads((out / "tables" / "schema.json").read_text())
    for name, cols in schema.items():
        header = (out / "tables" / name).read_text().splitlines()[0]
        assert header.split(",") == cols


def test_config_hash_matches_bytes(tmp_path):
    cfg = _write(tmp_path, MARKER_CFG.format(out=tmp_path / "out"))
    parsed, raw = load_config(cfg)
    import hashlib
    assert hashlib.sha256(raw).hexdigest() == __import__("chernlab.config",
                                                         fromlist=["config_hash"]).config_hash(raw)


def test_validate_config_rejects_bad_grid():
    with pytest.raises(ConfigError) as err:
        validate_config({"experiment": "marker", "model": {"family": "atomic_limit"},
                         "sizes": [8], "gwb": {"s_grid": []}})
    assert "s_grid" in str(err.value)


def test_gwb_experiment_runs(tmp_path):
    out = tmp_path / "out"
    cfg_text = """\
experiment: gwb
seed: 1
model:
  family: ssh_1d
  parameters: {v: 0.3, w: 1.0}
sizes: [12, 16]
island: {gap_tol: 0.4}
output_dir: "%s"
""" % out
    cfg = _write(tmp_path, cfg_text)
    assert run_command(["run", "--config", cfg]) == 0
    report = json.loads((out / "reports" / "gwb.json").read_text())
    assert report["localization"]["stable_alpha"] is not None
    assert (out / "tables" / "gwb_moments.csv").exists()
