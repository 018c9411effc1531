"""HTTP service exposing the persisted dataset and linkage operations.

All GETs are pure reads against one immutable snapshot loaded at
startup; POST /api/region-ratio is computation-only; POST /api/regions
appends to the persisted analyst region list through a single lock.
Every number served either comes verbatim from a pipeline artifact or is
recomputed from the same inputs with the same code path, so API values
match persisted values exactly.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from starlette.exceptions import HTTPException as StarletteHTTPException

from .cli import A, grid_from_dict, read_ddp_csv, require, zones_path
from .config import RunConfig
from .griddata import load_series
from .linkage import (
    CensusZone,
    RegionSelection,
    aggregate_region,
    compute_weights,
    estimate_market_share,
    resolve_region,
    zones_from_geojson,
)


@dataclass
class Dataset:
    zones: list[CensusZone]
    weights: dict
    grid: object
    frame: np.ndarray
    ratio_geojson: dict
    summary: dict
    boxplots: dict
    ddp: dict[str, list[float]]
    groups: dict[str, list[str]]
    reference_share: float
    default_buffer_m: float
    method: str
    regions_path: Path


def load_dataset(cfg: RunConfig) -> Dataset:
    out = cfg.output_dir
    require(
        cfg,
        "serve",
        "series",
        "series_meta",
        "ratio_geojson",
        "summary",
        "boxplots",
        "ddp",
        "assignments",
    )
    zpath = zones_path(cfg, "serve")
    zones = zones_from_geojson(json.loads(zpath.read_text()), cfg.geo_origin)

    summary = json.loads((out / A["summary"]).read_text())
    boxplots = json.loads((out / A["boxplots"]).read_text())
    ratio_geojson = json.loads((out / A["ratio_geojson"]).read_text())

    meta = json.loads((out / A["series_meta"]).read_text())
    grid = grid_from_dict(meta["grid"])
    series, _ = load_series(out / A["series"], grid)
    snapshot = summary["snapshot"]
    frame = series.frame(snapshot["date"], snapshot["quarter"]).values

    weights = compute_weights(zones, grid)

    curves = {c.day_id: c.values.tolist() for c in read_ddp_csv(out / A["ddp"])}
    groups: dict[str, list[str]] = {}
    with open(out / A["assignments"]) as fh:
        fh.readline()
        for line in fh:
            day, cluster, subgroup = line.strip().split(",")
            groups.setdefault(f"{cluster}.{subgroup}", []).append(day)

    link_cfg = cfg.linkage
    return Dataset(
        zones=zones,
        weights=weights,
        grid=grid,
        frame=frame,
        ratio_geojson=ratio_geojson,
        summary=summary,
        boxplots=boxplots,
        ddp=curves,
        groups=groups,
        reference_share=float(link_cfg["national_share"]),
        default_buffer_m=float(link_cfg["default_buffer_m"]),
        method=link_cfg["method"],
        regions_path=out / "regions.json",
    )


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message


def _parse_selection(body, ds: Dataset) -> RegionSelection:
    if not isinstance(body, dict):
        raise ApiError(400, "malformed_body", "request body must be a JSON object")
    zone_ids = body.get("zone_ids")
    if not isinstance(zone_ids, list) or not zone_ids:
        raise ApiError(400, "malformed_body", "zone_ids must be a non-empty list")
    if not all(isinstance(z, str) for z in zone_ids):
        raise ApiError(400, "malformed_body", "zone_ids must be strings")
    buffer_m = body.get("buffer_m", 0.0)
    if not isinstance(buffer_m, (int, float)) or isinstance(buffer_m, bool) or buffer_m < 0:
        raise ApiError(400, "malformed_body", "buffer_m must be a number >= 0")
    known = {z.zone_id for z in ds.zones}
    unknown = sorted(set(zone_ids) - known)
    if unknown:
        raise ApiError(404, "unknown_zone", f"unknown zone ids: {unknown}")
    return RegionSelection(zone_ids, buffer_m=float(buffer_m))


def _region_payload(selection: RegionSelection, ds: Dataset) -> dict:
    members = resolve_region(selection, ds.zones)
    record = aggregate_region(
        selection, ds.zones, ds.frame, ds.weights, ds.grid, ds.method
    )
    return {
        "zone_ids": members,
        "n_zones": len(members),
        "tim_users": record.tim_users,
        "residents_filtered": record.residents_filtered,
        "ratio": record.ratio,
        "reference_share": ds.reference_share,
    }


def _load_regions(ds: Dataset) -> list[dict]:
    if ds.regions_path.exists():
        return json.loads(ds.regions_path.read_text())
    return []


def _market_share_payload(ds: Dataset) -> dict:
    saved = _load_regions(ds)
    regions_out = []
    selections = []
    for region in saved:
        selection = RegionSelection(region["zone_ids"], region.get("buffer_m", 0.0))
        selections.append(selection)
        record = aggregate_region(
            selection, ds.zones, ds.frame, ds.weights, ds.grid, ds.method
        )
        regions_out.append(
            {
                "name": region.get("name", ""),
                "zone_ids": sorted(region["zone_ids"]),
                "buffer_m": region.get("buffer_m", 0.0),
                "ratio": record.ratio,
            }
        )
    if selections:
        estimate = estimate_market_share(
            selections,
            ds.zones,
            ds.frame,
            ds.weights,
            ds.grid,
            reference_share=ds.reference_share,
            method=ds.method,
        )
        point, spread = estimate.point_estimate, estimate.spread_iqr
    else:
        point, spread = None, None
    return {
        "regions": regions_out,
        "n_regions": len(regions_out),
        "point_estimate": point,
        "spread_iqr": spread,
        "reference_share": ds.reference_share,
    }


def build_app(cfg: RunConfig) -> FastAPI:
    ds = load_dataset(cfg)
    app = FastAPI(title="gridlink", version="0.1.0", docs_url=None, redoc_url=None)
    regions_lock = threading.Lock()

    @app.exception_handler(ApiError)
    async def api_error_handler(_request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "message": exc.message}
        )

    @app.exception_handler(StarletteHTTPException)
    async def http_error_handler(_request, exc: StarletteHTTPException):
        return JSONResponse(
            status_code=exc.status_code,
            content={"code": "http_error", "message": str(exc.detail)},
        )

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(_request, exc):
        return JSONResponse(
            status_code=400, content={"code": "malformed_body", "message": str(exc)}
        )

    @app.get("/api/zones")
    def get_zones():
        return ds.ratio_geojson

    @app.get("/api/summary")
    def get_summary():
        return ds.summary

    @app.get("/api/groups")
    def get_groups():
        return {
            "groups": [
                {"group": g, "n_days": len(days), "days": sorted(days)}
                for g, days in sorted(ds.groups.items())
            ]
        }

    @app.get("/api/ddp/{group}")
    def get_ddp(group: str):
        if group not in ds.boxplots:
            raise ApiError(404, "unknown_group", f"no such group: {group}")
        days = sorted(ds.groups.get(group.split("/")[0], []))
        return {
            "group": group,
            "days": days,
            "curves": {d: ds.ddp[d] for d in days if d in ds.ddp},
            "boxplot": ds.boxplots[group],
        }

    async def read_json_body(request: Request) -> dict:
        try:
            return await request.json()
        except Exception:
            raise ApiError(400, "malformed_body", "body is not valid JSON") from None

    @app.post("/api/region-ratio")
    async def region_ratio(request: Request):
        body = await read_json_body(request)
        selection = _parse_selection(body, ds)
        return _region_payload(selection, ds)

    @app.get("/api/market-share")
    def market_share():
        return _market_share_payload(ds)

    @app.post("/api/regions")
    async def post_region(request: Request):
        body = await read_json_body(request)
        selection = _parse_selection(body, ds)
        name = body.get("name") or f"region-{len(selection.zone_ids)}"
        if not isinstance(name, str):
            raise ApiError(400, "malformed_body", "name must be a string")
        entry = {
            "name": name,
            "zone_ids": sorted(selection.zone_ids),
            "buffer_m": selection.buffer_m,
        }
        with regions_lock:
            saved = _load_regions(ds)
            saved.append(entry)
            ds.regions_path.write_text(json.dumps(saved, indent=1) + "\n")
        payload = _market_share_payload(ds)
        payload["saved"] = entry
        return payload

    static_dir = (cfg.base_dir / cfg.service["static_dir"]).resolve()
    if static_dir.is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="static")

    return app
