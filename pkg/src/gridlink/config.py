"""Run configuration: JSON schema, defaults, env overrides, hashing.

A run is driven by one JSON file holding either real input paths (grid
CSV plus zones GeoJSON) or a synthetic-city generator section - exactly
one of the two. The resolved configuration hashes without its output
directory so reruns into different directories stay byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .geo import GeoPoint, GridSpec, PlanarPoint
from .griddata import CellRegion
from .hog import HogParams

ENV_PREFIX = "GRIDLINK_"

DEFAULTS = {
    "geo_origin": {"lon": 10.21, "lat": 45.54},
    "standardize_mode": "global",
    "hog": {
        "cell_px": 3,
        "block_cells": 2,
        "block_stride": 1,
        "n_bins": 9,
        "norm_epsilon": 1e-6,
    },
    "clustering": {
        "k_range": [2, 6],
        "g_max": 4,
        "g_threshold": 0.5,
        "k": None,
        "n_basis": 12,
    },
    "ddp_region": None,
    "boxplot": {"by_month": False, "fence_factor": 1.5},
    "linkage": {
        "snapshot_date": None,
        "snapshot_quarter": 84,  # 21:00
        "default_buffer_m": 250.0,
        "national_share": 0.302,
        "method": "zone_fraction",
    },
    "service": {"bind": "127.0.0.1:8787", "static_dir": "frontend/dist"},
    "output_dir": "out",
    "seed": 2016,
}


@dataclass
class RunConfig:
    raw: dict
    base_dir: Path
    geo_origin: GeoPoint = field(init=False)
    seed: int = field(init=False)
    output_dir: Path = field(init=False)

    def __post_init__(self):
        cfg = self.raw
        origin = cfg["geo_origin"]
        self.geo_origin = GeoPoint(lon=origin["lon"], lat=origin["lat"])
        self.seed = int(cfg["seed"])
        self.output_dir = (self.base_dir / cfg["output_dir"]).resolve()

    # -- sections ----------------------------------------------------------
    @property
    def synth(self) -> dict | None:
        return self.raw.get("synth")

    @property
    def input_paths(self) -> dict | None:
        return self.raw.get("input")

    def grid_spec(self) -> GridSpec:
        g = self.raw.get("grid")
        if g is None:
            raise ConfigError("config has no grid section (required for input runs)")
        return GridSpec(
            origin=PlanarPoint(g.get("origin_x", 0.0), g.get("origin_y", 0.0)),
            cell_size=float(g["cell_size_m"]),
            n_rows=int(g["n_rows"]),
            n_cols=int(g["n_cols"]),
        )

    def hog_params(self) -> HogParams:
        h = self.raw["hog"]
        return HogParams(
            cell_px=int(h["cell_px"]),
            block_cells=int(h["block_cells"]),
            block_stride=int(h["block_stride"]),
            n_bins=int(h["n_bins"]),
            norm_epsilon=float(h["norm_epsilon"]),
        )

    def ddp_region(self) -> CellRegion | None:
        r = self.raw.get("ddp_region")
        if r is None:
            return None
        return CellRegion(int(r[0]), int(r[1]), int(r[2]), int(r[3]))

    @property
    def clustering(self) -> dict:
        return self.raw["clustering"]

    @property
    def boxplot(self) -> dict:
        return self.raw["boxplot"]

    @property
    def linkage(self) -> dict:
        return self.raw["linkage"]

    @property
    def service(self) -> dict:
        return self.raw["service"]

    @property
    def standardize_mode(self) -> str:
        return self.raw["standardize_mode"]

    def resolve_input(self, key: str) -> Path:
        return (self.base_dir / self.input_paths[key]).resolve()

    def config_hash(self) -> str:
        """Hash of the resolved config without the output directory, so
        the same run into two directories produces identical manifests."""
        hashable = {k: v for k, v in self.raw.items() if k != "output_dir"}
        blob = json.dumps(hashable, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _merge_defaults(raw: dict) -> dict:
    merged = {}
    for key, default in DEFAULTS.items():
        if isinstance(default, dict) and key in raw:
            section = dict(default)
            section.update(raw[key] or {})
            merged[key] = section
        else:
            merged[key] = raw.get(key, default)
    for key in raw:
        if key not in merged:
            merged[key] = raw[key]
    return merged


def _apply_env_overrides(raw: dict) -> dict:
    seed = os.environ.get(ENV_PREFIX + "SEED")
    if seed is not None:
        raw["seed"] = int(seed)
    out = os.environ.get(ENV_PREFIX + "OUT")
    if out is not None:
        raw["output_dir"] = out
    return raw


def load_config(
    path, seed_override: int | None = None, out_override: str | None = None
) -> RunConfig:
    """Load, default-fill, env-override and validate a run config.

    Precedence: CLI flag > environment (GRIDLINK_*) > config file value.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None

    raw = _merge_defaults(raw)
    raw = _apply_env_overrides(raw)
    if seed_override is not None:
        raw["seed"] = int(seed_override)
    if out_override is not None:
        raw["output_dir"] = out_override

    has_input = raw.get("input") is not None
    has_synth = raw.get("synth") is not None
    if has_input == has_synth:
        raise ConfigError("config must have exactly one of 'input' or 'synth'")

    cfg = RunConfig(raw=raw, base_dir=path.parent.resolve())
    if has_input:
        for key in ("grid_csv", "zones_geojson"):
            if key not in raw["input"]:
                raise ConfigError(f"input section missing '{key}'")
            resolved = cfg.resolve_input(key)
            if not resolved.exists():
                raise ConfigError(f"input file not found: {resolved}")
        cfg.grid_spec()  # validates grid section presence and shape
    return cfg
