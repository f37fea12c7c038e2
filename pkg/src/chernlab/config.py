"""Run configuration: YAML ingestion and validation.

A run is fully described by one structured-text file; the CLI adds only the
config path, output directory, verbosity, and thread count, so experiments
are archivable artifacts.  All randomness flows from the top-level seed
through named substreams unless a component pins its own seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import yaml

from .dichotomy import PipelineSettings
from .models import DisorderSpec, ModelSpec, derive_seed

EXPERIMENTS = ("marker", "gwb", "dichotomy", "stability")


class ConfigError(ValueError):
    """Invalid run configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"config field '{field_name}': {message}")


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    model: ModelSpec
    sizes: tuple
    l_values: tuple
    boundary: str
    island: Mapping
    gwb: Mapping
    chern: Mapping
    stability: Mapping
    output_dir: str
    seed: int

    def pipeline_settings(self) -> PipelineSettings:
        return PipelineSettings(
            l_values=self.l_values,
            boundary=self.boundary,
            island=self.island,
            cluster_tol=self.gwb.get("cluster_tol"),
            s_grid=tuple(self.gwb.get("s_grid", (1.0, 2.0, 3.0, 4.0, 5.0, 6.0))),
            alpha_grid=tuple(self.gwb.get("alpha_grid", (0.1, 0.2, 0.4, 0.8))),
            growth_tol=float(self.gwb.get("growth_tol", 0.10)),
            k_grid=int(self.chern.get("k_grid", 12)),
            switch_kind=str(self.chern.get("switch", {}).get("kind", "step")),
            switch_steepness=float(self.chern.get("switch", {}).get("steepness", 1.0)),
        )


def _require(mapping: Mapping, key: str, outer: str = ""):
    name = f"{outer}.{key}" if outer else key
    if key not in mapping:
        raise ConfigError(name, "missing")
    return mapping[key]


def parse_model(section: Mapping, master_seed: int) -> ModelSpec:
    family = _require(section, "family", "model")
    parameters = dict(section.get("parameters", {}))
    disorder = None
    if section.get("disorder"):
        dsec = section["disorder"]
        try:
            disorder = DisorderSpec(
                kind=_require(dsec, "kind", "model.disorder"),
                strength=float(_require(dsec, "strength", "model.disorder")),
                seed=int(dsec.get("seed", derive_seed(master_seed, "disorder"))),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("model.disorder", str(exc)) from exc
    try:
        return ModelSpec(family, parameters, disorder,
                         seed=int(section.get("seed", master_seed)))
    except ValueError as exc:
        raise ConfigError("model", str(exc)) from exc


def load_config(path) -> tuple[RunConfig, bytes]:
    """Parse and validate a config file; returns (config, raw bytes for hashing)."""
    raw = Path(path).read_bytes()
    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not parseable YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("<file>", "top level must be a mapping")
    return validate_config(data), raw


def validate_config(data: Mapping) -> RunConfig:
    experiment = _require(data, "experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {EXPERIMENTS}")
    seed = int(data.get("seed", 0))
    model = parse_model(_require(data, "model"), seed)

    sizes = tuple(int(s) for s in _require(data, "sizes"))
    if not sizes:
        raise ConfigError("sizes", "must be non-empty")
    if list(sizes) != sorted(sizes):
        raise ConfigError("sizes", "must be ascending")
    if any(s < 2 for s in sizes):
        raise ConfigError("sizes", "every size must be >= 2")

    l_values = tuple(float(v) for v in data.get("L_values", ()))
    if l_values:
        if list(l_values) != sorted(l_values):
            raise ConfigError("L_values", "must be ascending")
        if model.dimension == 2 and max(l_values) >= min(sizes) / 2:
            raise ConfigError(
                "L_values",
                f"max L={max(l_values)} is not interior to the smallest size "
                f"{min(sizes)} (needs L < size/2)")

    boundary = data.get("boundary", "open")
    if boundary not in ("open", "periodic"):
        raise ConfigError("boundary", "must be open or periodic")

    island = dict(data.get("island", {"bloch_band": (0, 0)}))
    gwb = dict(data.get("gwb", {}))
    for grid_key in ("s_grid", "alpha_grid"):
        if grid_key in gwb and not gwb[grid_key]:
            raise ConfigError(f"gwb.{grid_key}", "must be non-empty")
    chern = dict(data.get("chern", {}))
    if "k_grid" in chern and int(chern["k_grid"]) < 6:
        raise ConfigError("chern.k_grid", "must be >= 6")
    stability = dict(data.get("stability", {}))
    if experiment == "stability":
        grid = stability.get("lambda_grid")
        if not grid:
            raise ConfigError("stability.lambda_grid", "missing or empty")
        stability["lambda_grid"] = tuple(float(v) for v in grid)

    return RunConfig(experiment, model, sizes, l_values, boundary, island,
                     gwb, chern, stability, str(data.get("output_dir", "out")), seed)


def config_hash(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()
