"""Command-line entry points: config-driven experiment runs.

``chernlab run --config cfg.yaml --out DIR [--threads N] [--verbose]``
``chernlab validate --config cfg.yaml``

Exit codes: 0 success, 1 verdict violation (CI-friendly), 2 configuration
error, 3 numerical failure (gap closure, band crossing, eigensolver).
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .chern import BandCrossingError, ChernReport, chern_marker_boxed, \
    commutator_identity_defect, hall_conductance_switch, local_chern_map, \
    marker_diagonal, switch_function
from .config import ConfigError, RunConfig, config_hash, load_config
from .dichotomy import GapClosedError, SizeStage, dichotomy_experiment, \
    default_l_values, fermi_projection, run_stage, select_island, stability_sweep, _oracle_chern
from .gwb import completeness_defect, off_diagonal_profile, sup_moment
from .models import NonHermitianError, build_model
from .reports import ResultBundle, build_manifest, emit_report, jsonable
from .spectral import diagonalize


def _map_sizes(fn, sizes, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, sizes))
    return [fn(s) for s in sizes]


def _marker_stage(cfg: RunConfig, settings, size: int):
    h = build_model(cfg.model, size, settings.boundary)
    spectrum = diagonalize(h)
    island = select_island(spectrum, settings.island, cfg.model, settings.k_grid)
    p = fermi_projection(spectrum, island)
    ls = settings.l_values or default_l_values(p.geometry)
    diag = marker_diagonal(p)
    seq = chern_marker_boxed(p, ls, diagonal=diag)
    defect = commutator_identity_defect(p, max(ls))
    return p, seq, defect, diag


def _run_marker(cfg: RunConfig, bundle: ResultBundle, threads: int) -> int:
    settings = cfg.pipeline_settings()
    oracle = _oracle_chern(cfg.model, settings)
    stages = _map_sizes(lambda s: _marker_stage(cfg, settings, s), cfg.sizes, threads)
    by_size_rows = []
    reports = {}
    for size, (p, seq, defect, diag) in zip(cfg.sizes, stages):
        for l, t in seq.entries:
            by_size_rows.append([size, l, t])
        reports[str(size)] = ChernReport(seq.extrapolated, seq, defect,
                                         oracle_chern=oracle).to_jsonable()
    p, seq, defect, diag = stages[-1]
    bundle.add_table("tuv_sequence", ["L", "t_L"], [[l, t] for l, t in seq.entries])
    bundle.add_table("markers_by_size", ["size", "L", "t_L"], by_size_rows)
    lmap = local_chern_map(p, diagonal=diag)
    bundle.add_table("local_map", ["x", "y", "marker"],
                     [[x, y, m] for (x, y), m in zip(p.geometry.sites, lmap)])
    s1 = switch_function(p.geometry, 1, settings.switch_kind, settings.switch_steepness)
    s2 = switch_function(p.geometry, 2, settings.switch_kind, settings.switch_steepness)
    reports["switch_conductance"] = hall_conductance_switch(p, s1, s2)
    bundle.add_report("marker", reports)
    return 0


def _run_gwb(cfg: RunConfig, bundle: ResultBundle, threads: int) -> int:
    from .gwb import export_gwb_csv, fit_localization

    settings = cfg.pipeline_settings()
    stages = _map_sizes(lambda s: run_stage(cfg.model, s, settings), cfg.sizes, threads)
    loc = fit_localization([st.gwb for st in stages], settings.s_grid,
                           settings.alpha_grid, settings.growth_tol)
    last = stages[-1]
    bundle.tables["gwb_moments"] = export_gwb_csv(last.gwb, settings.s_grid)
    profile = off_diagonal_profile(last.gwb, 1)
    bundle.add_table("offdiag_profile", ["distance", "value"],
                     [[d, v] for d, v in profile.samples])
    bundle.add_report("gwb", {
        "localization": loc,
        "per_size": {str(st.size): {
            "rank": st.projector.rank,
            "completeness_defect": completeness_defect(st.gwb),
            "gram_defect": st.gwb.gram_defect(),
            "m_star": st.gwb.m_star,
            "min_center_spacing": st.gwb.min_center_spacing,
        } for st in stages},
        "profile": {"k_s": profile.k_s, "exponent": profile.exponent,
                    "epsilon": profile.epsilon, "i1": profile.i1,
                    "i2": profile.i2, "i3": profile.i3},
    })
    return 0


def _run_dichotomy(cfg: RunConfig, bundle: ResultBundle, threads: int) -> int:
    settings = cfg.pipeline_settings()
    report = dichotomy_experiment(cfg.model, cfg.sizes, settings)
    bundle.add_table("tuv_sequence", ["L", "t_L"],
                     [[l, t] for l, t in report.chern.sequence.entries])
    dec = report.decomposition
    bundle.add_table("decomposition", ["L", "T1", "T2", "T3"],
                     [[l, dec.normalized[0][i], dec.normalized[1][i], dec.normalized[2][i]]
                      for i, l in enumerate(dec.l_values)])
    mass = report.mass
    bundle.add_table("mass", ["L", "mass_out", "mass_in"],
                     [[l, mass.mass_out[i], mass.mass_in[i]]
                      for i, l in enumerate(mass.l_values)])
    rows = []
    for s, vals in sorted(report.gwb_localization.moments_s.items()):
        for size, v in zip(report.sizes, vals):
            rows.append(["polynomial", s, size, v])
    for a, vals in sorted(report.gwb_localization.moments_alpha.items()):
        for size, v in zip(report.sizes, vals):
            rows.append(["exponential", a, size, v])
    bundle.add_table("moments_by_size", ["kind", "rate", "size", "sup_moment"], rows)
    bundle.add_report("dichotomy", report)
    return 1 if report.verdict == "violation-flag" else 0


def _run_stability(cfg: RunConfig, bundle: ResultBundle, threads: int) -> int:
    settings = cfg.pipeline_settings()
    grid = cfg.stability["lambda_grid"]
    tol = float(cfg.stability.get("tolerance", 0.1))
    size = cfg.sizes[-1]
    result = stability_sweep(cfg.model, grid, size, settings, tol)
    bundle.add_table("stability", ["lambda", "marker", "bulk_gap"],
                     [[lam, rep.marker, gap]
                      for (lam, rep), gap in zip(result.entries, result.gaps)])
    bundle.add_report("stability", {
        "entries": {f"{lam:g}": rep.to_jsonable() for lam, rep in result.entries},
        "variation": result.variation,
        "variation_ok": result.variation_ok,
        "tolerance": result.tolerance,
    })
    return 0 if result.variation_ok else 1


_RUNNERS = {
    "marker": _run_marker,
    "gwb": _run_gwb,
    "dichotomy": _run_dichotomy,
    "stability": _run_stability,
}


def run_command(argv) -> int:
    """Parse argv, run the requested command, return the process exit code."""
    parser = argparse.ArgumentParser(prog="chernlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the experiment described by a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="output directory (default: config output_dir)")
    p_run.add_argument("--threads", type=int,
                       default=int(os.environ.get("CHERNLAB_THREADS", "1")))
    p_run.add_argument("--verbose", action="store_true")
    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("--config", required=True)
    args = parser.parse_args(argv)

    try:
        cfg, raw = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print(f"ok: {args.config} ({cfg.experiment})")
        return 0

    bundle = ResultBundle(manifest=build_manifest(config_hash(raw), {
        "experiment": cfg.experiment, "sizes": list(cfg.sizes),
        "L_values": list(cfg.l_values), "boundary": cfg.boundary,
        "seed": cfg.seed, "model_family": cfg.model.family,
        "model_parameters": {k: str(v) for k, v in sorted(cfg.model.parameters.items())},
    }))
    t0 = time.time()
    try:
        code = _RUNNERS[cfg.experiment](cfg, bundle, max(1, args.threads))
    except GapClosedError as exc:
        where = f"size {exc.size}" if exc.size is not None else f"lambda {exc.strength}"
        print(f"error: numerical failure at {where}: {exc}", file=sys.stderr)
        return 3
    except (BandCrossingError, NonHermitianError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 3
    out_dir = args.out if args.out is not None else cfg.output_dir
    paths = emit_report(bundle, out_dir)
    if args.verbose:
        print(f"wrote {len(paths)} files to {out_dir} in {time.time() - t0:.1f}s",
              file=sys.stderr)
        for p in paths:
            print(f"  {p}", file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
