"""Result bundles: deterministic CSV/JSON emission with a schema file.

Identical configs reproduce byte-identical bundles: floats are formatted with
%.17g, JSON keys are sorted, and nothing wall-clock-dependent enters the
bundle (run timing goes to the log, not the manifest).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__


def fmt(value) -> str:
    """Deterministic scalar formatting for CSV cells."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    v = float(value)
    if math.isnan(v):
        return "nan"
    return f"{v:.17g}"


def csv_table(header: list, rows: list) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(x) if not isinstance(x, str) else x for x in row))
    return "\n".join(lines) + "\n"


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and report objects for json."""
    if hasattr(obj, "to_jsonable"):
        return jsonable(obj.to_jsonable())
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and (math.isnan(obj) or math.isinf(obj)):
        return repr(obj)
    return obj


@dataclass
class ResultBundle:
    """Manifest plus named CSV tables and JSON reports."""

    manifest: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)    # name -> csv text
    reports: dict = field(default_factory=dict)   # name -> jsonable dict

    def add_table(self, name: str, header: list, rows: list) -> None:
        self.tables[name] = csv_table(header, rows)

    def add_report(self, name: str, payload) -> None:
        self.reports[name] = jsonable(payload)


def build_manifest(cfg_hash: str, config_echo: dict) -> dict:
    return {
        "schema_version": 1,
        "config_hash": cfg_hash,
        "config": jsonable(config_echo),
        "versions": {"chernlab": __version__, "numpy": np.__version__},
    }


def emit_report(bundle: ResultBundle, out_dir) -> list:
    """Write manifest.json, tables/*.csv (+ schema.json), reports/*.json.

    Returns the list of written paths; identical bundles produce
    byte-identical files.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        manifest = dict(bundle.manifest)
        manifest["tables"] = sorted(bundle.tables)
        manifest["reports"] = sorted(bundle.reports)
        mpath = out / "manifest.json"
        mpath.write_text(json.dumps(jsonable(manifest), sort_keys=True, indent=2) + "\n")
        paths.append(mpath)
        if bundle.tables:
            tdir = out / "tables"
            tdir.mkdir(exist_ok=True)
            schema = {}
            for name in sorted(bundle.tables):
                text = bundle.tables[name]
                fpath = tdir / f"{name}.csv"
                fpath.write_text(text)
                paths.append(fpath)
                schema[f"{name}.csv"] = text.splitlines()[0].split(",")
            spath = tdir / "schema.json"
            spath.write_text(json.dumps(schema, sort_keys=True, indent=2) + "\n")
            paths.append(spath)
        if bundle.reports:
            rdir = out / "reports"
            rdir.mkdir(exist_ok=True)
            for name in sorted(bundle.reports):
                fpath = rdir / f"{name}.json"
                fpath.write_text(json.dumps(bundle.reports[name], sort_keys=True,
                                            indent=2) + "\n")
                paths.append(fpath)
        return [str(p) for p in paths]
    except OSError as exc:
        raise OSError(f"failed writing bundle under {out}: {exc}") from exc
