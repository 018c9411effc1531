"""Command-line driver: synth, ingest, features, cluster, fboxplot,
linkage, pipeline, serve.

Each stage reads its predecessors' persisted artifacts from the output
directory, writes its own module's external format, and records a
manifest (config hash, seed, input/output content hashes). Stage timings
go to a sidecar under timings/ and are the only non-deterministic bytes
an output tree contains.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import BSplineBasis, classify_days
from .config import RunConfig, load_config
from .errors import ConfigError, GridlinkError, StageDependencyError
from .fboxplot import (
    boxplot_to_dict,
    functional_boxplot,
    render_boxplot_svg,
    split_by_month,
)
from .geo import GridSpec, PlanarPoint, rect_polygon
from .griddata import (
    DDPCurve,
    compute_ddp,
    load_series,
    standardize,
    synth_generate,
    synthetic_city_config,
    write_series_csv,
)
from .hog import DailyFeatureVector, daily_features, hog_layout
from .linkage import (
    CensusZone,
    compute_weights,
    ratio_table,
    write_ratio_csv,
    zones_from_geojson,
    zones_to_geojson,
)

log = logging.getLogger("gridlink")

A = {
    "grid_csv": "grid.csv.gz",
    "grid_spec": "grid_spec.json",
    "zones": "zones.geojson",
    "ground_truth": "ground_truth.json",
    "series": "series.csv.gz",
    "series_meta": "series_meta.json",
    "features": "features.csv",
    "features_layout": "features_layout.json",
    "ddp": "ddp.csv",
    "assignments": "assignments.csv",
    "cluster_report": "cluster_report.json",
    "boxplots": "boxplots.json",
    "ratio_csv": "ratio.csv",
    "ratio_geojson": "ratio.geojson",
    "summary": "summary.json",
}


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def require(cfg: RunConfig, stage: str, *names: str) -> list[Path]:
    paths = []
    for name in names:
        path = cfg.output_dir / A[name]
        if not path.exists():
            raise StageDependencyError(stage, A[name])
        paths.append(path)
    return paths


def finish_stage(
    cfg: RunConfig, stage: str, t0: float, inputs: list[Path], outputs: list[Path]
) -> None:
    manifest = {
        "stage": stage,
        "version": __version__,
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "inputs": {p.name: sha256_file(p) for p in sorted(inputs)},
        "outputs": {
            str(p.relative_to(cfg.output_dir)): sha256_file(p) for p in sorted(outputs)
        },
    }
    write_json(cfg.output_dir / f"manifest-{stage}.json", manifest)
    timings = cfg.output_dir / "timings"
    timings.mkdir(exist_ok=True)
    (timings / f"{stage}.json").write_text(
        json.dumps({"stage": stage, "seconds": round(time.perf_counter() - t0, 3)})
        + "\n"
    )
    log.info("stage %s done in %.2fs", stage, time.perf_counter() - t0)


def grid_from_dict(g: dict) -> GridSpec:
    return GridSpec(
        origin=PlanarPoint(g["origin_x"], g["origin_y"]),
        cell_size=g["cell_size_m"],
        n_rows=g["n_rows"],
        n_cols=g["n_cols"],
    )


def grid_to_dict(grid: GridSpec) -> dict:
    return {
        "origin_x": grid.origin.x,
        "origin_y": grid.origin.y,
        "cell_size_m": grid.cell_size,
        "n_rows": grid.n_rows,
        "n_cols": grid.n_cols,
    }


def zones_from_layouts(synth_cfg) -> list[CensusZone]:
    """Synthetic zone layouts (cell rectangles) as census zones."""
    s = synth_cfg.grid.cell_size
    ox, oy = synth_cfg.grid.origin.x, synth_cfg.grid.origin.y
    zones = []
    for z in synth_cfg.zones:
        zones.append(
            CensusZone(
                zone_id=z.zone_id,
                polygon=rect_polygon(
                    ox + z.col0 * s, oy + z.row0 * s, ox + z.col1 * s, oy + z.row1 * s
                ),
                residents_total=z.population,
                residents_under11=z.under11,
                residents_over80=z.over80,
                land_use=z.land_use,
            )
        )
    return zones


def build_synth_config(cfg: RunConfig):
    params = cfg.synth or {}
    kind = params.get("kind", "city")
    if kind != "city":
        raise ConfigError(f"unknown synth kind: {kind}")
    return synthetic_city_config(
        seed=int(params.get("seed", cfg.seed)),
        n_days=int(params.get("n_days", 10)),
        q=float(params.get("q", 0.7)),
        p=float(params.get("p", 0.30)),
        block_grid=tuple(params.get("block_grid", [2, 2])),
        pop_scale=float(params.get("pop_scale", 2.7)),
        cell_size=float(params.get("cell_size_m", 150.0)),
        start_date=str(params.get("start_date", "2016-06-01")),
    )


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


def stage_synth(cfg: RunConfig) -> None:
    t0 = time.perf_counter()
    if cfg.synth is None:
        raise ConfigError("synth stage needs a 'synth' config section")
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    synth_cfg = build_synth_config(cfg)
    result = synth_generate(synth_cfg)

    write_series_csv(result.series, out / A["grid_csv"])
    write_json(out / A["grid_spec"], grid_to_dict(synth_cfg.grid))
    zones = zones_from_layouts(synth_cfg)
    doc = zones_to_geojson(zones, cfg.geo_origin)
    write_json(out / A["zones"], doc)
    write_json(out / A["ground_truth"], result.ground_truth)
    finish_stage(
        cfg,
        "synth",
        t0,
        [],
        [out / A[n] for n in ("grid_csv", "grid_spec", "zones", "ground_truth")],
    )


def resolve_grid(cfg: RunConfig, stage: str) -> GridSpec:
    if cfg.synth is not None:
        (spec_path,) = require(cfg, stage, "grid_spec")
        return grid_from_dict(json.loads(spec_path.read_text()))
    return cfg.grid_spec()


def zones_path(cfg: RunConfig, stage: str) -> Path:
    if cfg.synth is not None:
        (path,) = require(cfg, stage, "zones")
        return path
    return cfg.resolve_input("zones_geojson")


def stage_ingest(cfg: RunConfig) -> None:
    t0 = time.perf_counter()
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    grid = resolve_grid(cfg, "ingest")
    if cfg.synth is not None:
        (csv_path,) = require(cfg, "ingest", "grid_csv")
    else:
        csv_path = cfg.resolve_input("grid_csv")
    zpath = zones_path(cfg, "ingest")
    zones = zones_from_geojson(json.loads(zpath.read_text()), cfg.geo_origin)

    series, dropped = load_series(csv_path, grid)
    if not series.days:
        raise ConfigError("no complete days in the grid file")
    write_series_csv(series, out / A["series"])
    write_json(
        out / A["series_meta"],
        {
            "grid": grid_to_dict(grid),
            "day_ids": series.day_ids,
            "dropped_days": dropped,
            "n_zones": len(zones),
        },
    )
    finish_stage(
        cfg,
        "ingest",
        t0,
        [csv_path, zpath],
        [out / A["series"], out / A["series_meta"]],
    )


def load_canonical_series(cfg: RunConfig, stage: str):
    series_path, meta_path = require(cfg, stage, "series", "series_meta")
    meta = json.loads(meta_path.read_text())
    grid = grid_from_dict(meta["grid"])
    series, _ = load_series(series_path, grid)
    return series, meta


def stage_features(cfg: RunConfig) -> None:
    t0 = time.perf_counter()
    out = cfg.output_dir
    series, _ = load_canonical_series(cfg, "features")
    params = cfg.hog_params()
    std = standardize(series, mode=cfg.standardize_mode)
    daily = daily_features(std.days, params)

    layout = hog_layout(
        (series.grid.n_rows, series.grid.n_cols), params
    )
    n_features = len(daily[0].values)
    with open(out / A["features"], "w") as fh:
        fh.write("date," + ",".join(f"f{i}" for i in range(n_features)) + "\n")
        for day in daily:
            values = ",".join(np.format_float_positional(v, precision=9, trim="-")
                              for v in day.values)
            fh.write(f"{day.day_id},{values}\n")
    write_json(
        out / A["features_layout"],
        {
            "per_quarter_length": layout.length,
            "quarters": 96,
            "total_length": n_features,
            "blocks_y": layout.n_blocks_y,
            "blocks_x": layout.n_blocks_x,
            "block_cells": layout.block_cells,
            "n_bins": layout.n_bins,
            "standardize_mode": cfg.standardize_mode,
        },
    )

    curves = compute_ddp(series, cfg.ddp_region())
    with open(out / A["ddp"], "w") as fh:
        fh.write("date," + ",".join(f"q{q}" for q in range(96)) + "\n")
        for c in curves:
            fh.write(c.day_id + "," + ",".join(repr(float(v)) for v in c.values) + "\n")

    finish_stage(
        cfg,
        "features",
        t0,
        [out / A["series"], out / A["series_meta"]],
        [out / A[n] for n in ("features", "features_layout", "ddp")],
    )


def read_features_csv(path: Path) -> list[DailyFeatureVector]:
    daily = []
    with open(path) as fh:
        fh.readline()  # header
        for line in fh:
            day_id, _, rest = line.partition(",")
            daily.append(
                DailyFeatureVector(day_id, np.array(rest.split(","), dtype=float))
            )
    return daily


def read_ddp_csv(path: Path) -> list[DDPCurve]:
    curves = []
    with open(path) as fh:
        fh.readline()
        for line in fh:
            day_id, _, rest = line.partition(",")
            curves.append(DDPCurve(day_id, np.array(rest.split(","), dtype=float)))
    return curves


def stage_cluster(cfg: RunConfig) -> None:
    t0 = time.perf_counter()
    out = cfg.output_dir
    feat_path, ddp_path = require(cfg, "cluster", "features", "ddp")
    daily = read_features_csv(feat_path)
    curves = read_ddp_csv(ddp_path)

    cluster_cfg = cfg.clustering
    k_lo, k_hi = cluster_cfg["k_range"]
    k_hi = min(int(k_hi), len(daily) - 1)
    basis = BSplineBasis(n_basis=int(cluster_cfg["n_basis"]))
    result = classify_days(
        daily,
        curves,
        seed=cfg.seed,
        k_range=range(int(k_lo), k_hi + 1),
        g_max=int(cluster_cfg["g_max"]),
        k=cluster_cfg.get("k"),
        basis=basis,
        g_threshold=float(cluster_cfg["g_threshold"]),
    )

    final = result.final_groups
    with open(out / A["assignments"], "w") as fh:
        fh.write("date,kmeans_cluster,functional_subgroup\n")
        for day in sorted(final):
            cluster, subgroup = final[day].split(".")
            fh.write(f"{day},{cluster},{subgroup}\n")

    report = {
        "k": result.kmeans_result.k,
        "k_scores": (
            {str(k): v for k, v in result.choose_k_result.scores.items()}
            if result.choose_k_result
            else None
        ),
        "k_degenerate": (
            result.choose_k_result.degenerate if result.choose_k_result else False
        ),
        "inertia": result.kmeans_result.inertia,
        "inertia_history": result.kmeans_result.inertia_history,
        "iterations": result.kmeans_result.iterations,
        "g_choices": {str(c): g for c, g in result.g_choices.items()},
        "g_scores": {
            str(c): {str(g): s for g, s in scores.items()}
            for c, scores in result.g_scores.items()
        },
        "groups": sorted(set(final.values())),
        "seed": cfg.seed,
    }
    write_json(out / A["cluster_report"], report)
    finish_stage(
        cfg,
        "cluster",
        t0,
        [feat_path, ddp_path],
        [out / A["assignments"], out / A["cluster_report"]],
    )


def read_assignments(path: Path) -> dict[str, str]:
    groups = {}
    with open(path) as fh:
        fh.readline()
        for line in fh:
            day, cluster, subgroup = line.strip().split(",")
            groups[day] = f"{cluster}.{subgroup}"
    return groups


def stage_fboxplot(cfg: RunConfig, plot: bool = False) -> None:
    t0 = time.perf_counter()
    out = cfg.output_dir
    assign_path, ddp_path = require(cfg, "fboxplot", "assignments", "ddp")
    groups = read_assignments(assign_path)
    curves = {c.day_id: c for c in read_ddp_csv(ddp_path)}

    grouped: dict[str, list[DDPCurve]] = {}
    for day, group in groups.items():
        grouped.setdefault(group, []).append(curves[day])

    by_month = bool(cfg.boxplot["by_month"])
    factor = float(cfg.boxplot["fence_factor"])
    results = {}
    for group in sorted(grouped):
        members = sorted(grouped[group], key=lambda c: c.day_id)
        if by_month:
            for month, subset in split_by_month(members).items():
                results[f"{group}/{month}"] = functional_boxplot(subset, factor)
        else:
            results[group] = functional_boxplot(members, factor)

    write_json(
        out / A["boxplots"], {g: boxplot_to_dict(r) for g, r in results.items()}
    )
    outputs = [out / A["boxplots"]]
    if plot:
        plot_dir = out / "plots"
        plot_dir.mkdir(exist_ok=True)
        for group, result in results.items():
            if hasattr(result, "median_curve"):
                name = "group-" + group.replace("/", "-") + ".svg"
                svg = render_boxplot_svg(
                    result,
                    grouped.get(group.split("/")[0], []),
                    title=f"group {group}",
                )
                (plot_dir / name).write_text(svg)
                outputs.append(plot_dir / name)
    finish_stage(cfg, "fboxplot", t0, [assign_path, ddp_path], outputs)


def stage_linkage(cfg: RunConfig) -> None:
    t0 = time.perf_counter()
    out = cfg.output_dir
    series, meta = load_canonical_series(cfg, "linkage")
    zpath = zones_path(cfg, "linkage")
    zones = zones_from_geojson(json.loads(zpath.read_text()), cfg.geo_origin)
    grid = series.grid

    link_cfg = cfg.linkage
    snapshot_date = link_cfg["snapshot_date"] or series.day_ids[0]
    quarter = int(link_cfg["snapshot_quarter"])
    frame = series.frame(snapshot_date, quarter)

    weights = compute_weights(zones, grid)
    records, summary = ratio_table(
        zones, frame.values, weights, grid, method=link_cfg["method"]
    )
    write_ratio_csv(records, out / A["ratio_csv"])
    props = {
        r.zone_id: {
            "tim_users": r.tim_users,
            "residents_filtered": r.residents_filtered,
            "ratio": r.ratio,
        }
        for r in records
    }
    write_json(out / A["ratio_geojson"], zones_to_geojson(zones, cfg.geo_origin, props))
    write_json(
        out / A["summary"],
        {
            "snapshot": {"date": snapshot_date, "quarter": quarter},
            "summary": summary.to_dict() if summary else None,
            "reference_share": link_cfg["national_share"],
            "method": link_cfg["method"],
        },
    )
    finish_stage(
        cfg,
        "linkage",
        t0,
        [out / A["series"], out / A["series_meta"], zpath],
        [out / A[n] for n in ("ratio_csv", "ratio_geojson", "summary")],
    )


def stage_pipeline(cfg: RunConfig, plot: bool = False) -> None:
    if cfg.synth is not None:
        stage_synth(cfg)
    stage_ingest(cfg)
    stage_features(cfg)
    stage_cluster(cfg)
    stage_fboxplot(cfg, plot=plot)
    stage_linkage(cfg)


def cmd_serve(cfg: RunConfig, host_port: str | None = None) -> None:
    import uvicorn

    from .service import build_app

    app = build_app(cfg)
    bind = host_port or cfg.service["bind"]
    host, _, port = bind.partition(":")
    uvicorn.run(app, host=host, port=int(port or 8787), log_level="info")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridlink",
        description="Density-grid day classification and census linkage pipeline",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("synth", "generate the synthetic city dataset"),
        ("ingest", "validate and canonicalize the grid series and zones"),
        ("features", "standardize frames, extract daily feature stacks and DDPs"),
        ("cluster", "two-stage day classification"),
        ("fboxplot", "functional boxplots per final group"),
        ("linkage", "per-zone ratio table, map layer and summary"),
        ("pipeline", "run all stages in order"),
        ("serve", "serve the HTTP API and map UI"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="run config JSON path")
        p.add_argument("--out", help="output directory override")
        p.add_argument("--seed", type=int, help="seed override")
        p.add_argument("--verbose", action="store_true")
        if name in ("fboxplot", "pipeline"):
            p.add_argument(
                "--plot", action="store_true", help="emit SVG boxplot plots"
            )
        if name == "serve":
            p.add_argument("--bind", help="host:port override")
    return parser


STAGES = {
    "synth": stage_synth,
    "ingest": stage_ingest,
    "features": stage_features,
    "cluster": stage_cluster,
    "linkage": stage_linkage,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config, seed_override=args.seed, out_override=args.out)
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        if args.command in STAGES:
            STAGES[args.command](cfg)
        elif args.command == "fboxplot":
            stage_fboxplot(cfg, plot=args.plot)
        elif args.command == "pipeline":
            stage_pipeline(cfg, plot=args.plot)
        elif args.command == "serve":
            cmd_serve(cfg, args.bind)
    except (GridlinkError, ValueError, KeyError) as exc:
        report = {"code": type(exc).__name__, "message": str(exc)}
        print(json.dumps(report), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
