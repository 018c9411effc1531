"""Spatial record linkage: per-zone operator-user estimates from overlap
weights, ratio indices with age-filtered residents, distribution
diagnostics, analyst-region aggregation, and market-share estimation.

The per-zone estimate is the weighted cell sum multiplied by
area(zone)/area(cell); the ratio divides it by the zone's residents aged
11 to 80 (people unlikely to carry a phone are excluded from the
denominator).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, SchemaError
from .geo import (
    GeoPoint,
    GridSpec,
    OverlapWeights,
    PlanarPoint,
    Polygon,
    clipped_area,
    overlap_weights,
    polygon_area,
    project,
    unproject,
)

LAND_USE_TAGS = ("residential", "commercial", "industrial", "other", "unknown")

DEFAULT_NATIONAL_SHARE = 0.302


@dataclass(frozen=True)
class CensusZone:
    zone_id: str
    polygon: Polygon
    residents_total: int
    residents_under11: int
    residents_over80: int
    land_use: str = "unknown"

    def __post_init__(self):
        if min(self.residents_total, self.residents_under11, self.residents_over80) < 0:
            raise SchemaError(f"zone {self.zone_id}: negative resident count")
        if self.residents_under11 + self.residents_over80 > self.residents_total:
            raise SchemaError(f"zone {self.zone_id}: age bands exceed total")
        if self.land_use not in LAND_USE_TAGS:
            raise SchemaError(f"zone {self.zone_id}: unknown land use {self.land_use}")

    @property
    def residents_filtered(self) -> int:
        return self.residents_total - self.residents_under11 - self.residents_over80


@dataclass(frozen=True)
class RatioRecord:
    zone_id: str
    tim_users: float
    residents_filtered: int
    ratio: float | None  # absent (None) when no filtered residents

    def __post_init__(self):
        if self.tim_users < 0:
            raise SchemaError("tim_users must be >= 0")
        if (self.ratio is None) != (self.residents_filtered <= 0):
            raise SchemaError("ratio must be present iff filtered residents > 0")


@dataclass(frozen=True)
class RatioSummary:
    min: float
    p5: float
    p25: float
    median: float
    p75: float
    p95: float
    max: float
    n_zones: int
    n_undefined: int

    def to_dict(self) -> dict:
        return {
            "min": self.min,
            "p5": self.p5,
            "p25": self.p25,
            "median": self.median,
            "p75": self.p75,
            "p95": self.p95,
            "max": self.max,
            "n_zones": self.n_zones,
            "n_undefined": self.n_undefined,
        }


@dataclass(frozen=True)
class RegionSelection:
    zone_ids: frozenset[str]
    buffer_m: float = 0.0
    snapshot: tuple[str, int] | None = None  # (date, quarter)

    def __init__(self, zone_ids, buffer_m=0.0, snapshot=None):
        ids = frozenset(zone_ids)
        if not ids:
            raise ValueError("region selection needs at least one zone")
        if buffer_m < 0:
            raise ValueError("buffer_m must be >= 0")
        object.__setattr__(self, "zone_ids", ids)
        object.__setattr__(self, "buffer_m", float(buffer_m))
        object.__setattr__(self, "snapshot", snapshot)


@dataclass
class MarketShareEstimate:
    region_ratios: list[float]
    point_estimate: float | None
    spread_iqr: float | None
    reference_share: float = DEFAULT_NATIONAL_SHARE

    @property
    def failed(self) -> bool:
        return self.point_estimate is None


def compute_weights(
    zones: list[CensusZone], grid: GridSpec
) -> dict[str, OverlapWeights]:
    """Overlap weights for every zone on one grid, computed once and reused."""
    return {z.zone_id: overlap_weights(z.polygon, grid, z.zone_id) for z in zones}


def zone_tim_users(
    zone: CensusZone,
    frame: np.ndarray,
    w: OverlapWeights,
    grid: GridSpec,
    method: str = "zone_fraction",
) -> float:
    """Estimated operator users present in the zone for one frame.

    zone_fraction (default): (sum_k value_k * weight_k) * area(zone)/area(cell),
    with weights as fraction-of-zone-area. cell_fraction applies the area
    ratio per entry (weights become fraction-of-cell-area); the two are
    algebraically identical and differ only in rounding order, kept as a
    sensitivity knob.
    """
    frame = np.asarray(frame)
    if w.grid_shape != (grid.n_rows, grid.n_cols) or frame.shape != w.grid_shape:
        raise ConsistencyError(
            f"zone {zone.zone_id}: weights for grid {w.grid_shape}, "
            f"frame {frame.shape}, grid {(grid.n_rows, grid.n_cols)}"
        )
    if method not in ("zone_fraction", "cell_fraction"):
        raise ValueError(f"unknown method: {method}")
    area_ratio = polygon_area(zone.polygon) / grid.cell_area
    flat = frame.ravel()
    if method == "zone_fraction":
        weighted = sum(flat[idx] * wt for idx, wt in w.entries)
        return float(weighted * area_ratio)
    return float(sum(flat[idx] * (wt * area_ratio) for idx, wt in w.entries))


def ratio_index(zone: CensusZone, tim_users: float) -> RatioRecord:
    """Operator users over phone-age residents; absent when the zone has
    no such residents (never coerced to 0 or infinity)."""
    filtered = zone.residents_filtered
    ratio = tim_users / filtered if filtered > 0 else None
    return RatioRecord(
        zone_id=zone.zone_id,
        tim_users=float(tim_users),
        residents_filtered=filtered,
        ratio=ratio,
    )


def summarize_ratios(records: list[RatioRecord]) -> RatioSummary | None:
    """Linear-interpolation percentiles over the defined ratios.

    Returns None when no zone has a defined ratio (empty-summary signal).
    """
    defined = [r.ratio for r in records if r.ratio is not None]
    n_undefined = len(records) - len(defined)
    if not defined:
        return None
    arr = np.asarray(defined)
    p = np.percentile(arr, [0, 5, 25, 50, 75, 95, 100], method="linear")
    return RatioSummary(
        min=float(p[0]),
        p5=float(p[1]),
        p25=float(p[2]),
        median=float(p[3]),
        p75=float(p[4]),
        p95=float(p[5]),
        max=float(p[6]),
        n_zones=len(records),
        n_undefined=n_undefined,
    )


def ratio_table(
    zones: list[CensusZone],
    frame: np.ndarray,
    weights: dict[str, OverlapWeights],
    grid: GridSpec,
    method: str = "zone_fraction",
) -> tuple[list[RatioRecord], RatioSummary | None]:
    """Per-zone ratio records plus their distribution summary."""
    records = [
        ratio_index(z, zone_tim_users(z, frame, weights[z.zone_id], grid, method))
        for z in zones
    ]
    return records, summarize_ratios(records)


def resolve_region(
    selection: RegionSelection, zones: list[CensusZone]
) -> list[str]:
    """Zone ids forming the region: the selection plus, when buffer_m > 0,
    every zone properly intersecting the buffer-dilated bounding box of
    the selected zones' union.

    Dilation is bounding-box expansion, not true polygon offsetting:
    cheap, deterministic, and enough to capture neighboring
    antenna-hosting zones. With buffer 0 the region is exactly the
    selection.
    """
    by_id = {z.zone_id: z for z in zones}
    missing = sorted(i for i in selection.zone_ids if i not in by_id)
    if missing:
        raise KeyError(f"unknown zone ids: {missing}")
    member_ids = set(selection.zone_ids)
    if selection.buffer_m > 0:
        boxes = [by_id[i].polygon.bbox() for i in selection.zone_ids]
        xmin = min(b[0] for b in boxes) - selection.buffer_m
        ymin = min(b[1] for b in boxes) - selection.buffer_m
        xmax = max(b[2] for b in boxes) + selection.buffer_m
        ymax = max(b[3] for b in boxes) + selection.buffer_m
        for z in zones:
            if z.zone_id in member_ids:
                continue
            if clipped_area(z.polygon, (xmin, ymin, xmax, ymax)) > 0.0:
                member_ids.add(z.zone_id)
    return sorted(member_ids)


def aggregate_region(
    selection: RegionSelection,
    zones: list[CensusZone],
    frame: np.ndarray,
    weights: dict[str, OverlapWeights],
    grid: GridSpec,
    method: str = "zone_fraction",
) -> RatioRecord:
    """Combined ratio over a selected residential area plus its buffered
    surroundings: summed user estimates over summed filtered residents."""
    member_ids = resolve_region(selection, zones)
    by_id = {z.zone_id: z for z in zones}
    users = 0.0
    residents = 0
    for zone_id in member_ids:
        z = by_id[zone_id]
        users += zone_tim_users(z, frame, weights[zone_id], grid, method)
        residents += z.residents_filtered
    return RatioRecord(
        zone_id="+".join(member_ids),
        tim_users=users,
        residents_filtered=residents,
        ratio=users / residents if residents > 0 else None,
    )


def estimate_market_share(
    regions: list[RegionSelection],
    zones: list[CensusZone],
    frame: np.ndarray,
    weights: dict[str, OverlapWeights],
    grid: GridSpec,
    reference_share: float = DEFAULT_NATIONAL_SHARE,
    method: str = "zone_fraction",
) -> MarketShareEstimate:
    """Median of per-region combined ratios, with IQR as spread.

    Regions whose ratio is undefined are skipped; when all are undefined
    the estimate is flagged failed rather than raising.
    """
    if not regions:
        raise ValueError("need at least one region")
    ratios = []
    for selection in regions:
        record = aggregate_region(selection, zones, frame, weights, grid, method)
        if record.ratio is not None:
            ratios.append(record.ratio)
    if not ratios:
        return MarketShareEstimate([], None, None, reference_share)
    arr = np.asarray(ratios)
    q25, q50, q75 = np.percentile(arr, [25, 50, 75], method="linear")
    return MarketShareEstimate(
        region_ratios=[float(r) for r in ratios],
        point_estimate=float(q50),
        spread_iqr=float(q75 - q25),
        reference_share=reference_share,
    )


# ---------------------------------------------------------------------------
# GeoJSON ingestion / emission
# ---------------------------------------------------------------------------


def _planar_ring_from_lonlat(coords, origin: GeoPoint) -> list[tuple[float, float]]:
    ring = []
    for lonlat in coords:
        pt = project(GeoPoint(lon=float(lonlat[0]), lat=float(lonlat[1])), origin)
        ring.append((pt.x, pt.y))
    return ring


def zones_from_geojson(doc: dict, origin: GeoPoint) -> list[CensusZone]:
    """Parse a WGS84 FeatureCollection of census zones onto the local plane.

    Expects Polygon geometries (first ring exterior, rest holes) with
    properties zone_id, residents_total, residents_under11,
    residents_over80 and an optional land_use tag.
    """
    if doc.get("type") != "FeatureCollection":
        raise SchemaError("zones file must be a GeoJSON FeatureCollection")
    zones = []
    for i, feature in enumerate(doc.get("features", [])):
        props = feature.get("properties") or {}
        geom = feature.get("geometry") or {}
        if geom.get("type") != "Polygon":
            raise SchemaError(f"feature {i}: geometry must be Polygon")
        try:
            zone_id = str(props["zone_id"])
            total = int(props["residents_total"])
            under11 = int(props["residents_under11"])
            over80 = int(props["residents_over80"])
        except KeyError as exc:
            raise SchemaError(f"feature {i}: missing property {exc}") from None
        rings = geom.get("coordinates") or []
        if not rings:
            raise SchemaError(f"feature {i}: empty polygon")
        exterior = _planar_ring_from_lonlat(rings[0], origin)
        holes = [_planar_ring_from_lonlat(r, origin) for r in rings[1:]]
        zones.append(
            CensusZone(
                zone_id=zone_id,
                polygon=Polygon(exterior, holes),
                residents_total=total,
                residents_under11=under11,
                residents_over80=over80,
                land_use=str(props.get("land_use", "unknown")),
            )
        )
    return zones


def zones_to_geojson(
    zones: list[CensusZone],
    origin: GeoPoint,
    extra_properties: dict[str, dict] | None = None,
) -> dict:
    """Emit zones as a WGS84 FeatureCollection (lon, lat order);
    extra_properties maps zone_id to properties merged into each feature."""
    def lonlat_ring(ring) -> list[list[float]]:
        pts = [unproject(PlanarPoint(float(x), float(y)), origin) for x, y in ring]
        coords = [[p.lon, p.lat] for p in pts]
        coords.append(coords[0])  # close per RFC 7946
        return coords

    features = []
    for z in zones:
        rings = [lonlat_ring(z.polygon.exterior)] + [
            lonlat_ring(h) for h in z.polygon.holes
        ]
        props = {
            "zone_id": z.zone_id,
            "residents_total": z.residents_total,
            "residents_under11": z.residents_under11,
            "residents_over80": z.residents_over80,
            "land_use": z.land_use,
        }
        if extra_properties and z.zone_id in extra_properties:
            props.update(extra_properties[z.zone_id])
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": rings},
                "properties": props,
            }
        )
    return {"type": "FeatureCollection", "features": features}


def write_ratio_csv(records: list[RatioRecord], path) -> None:
    """`zone_id,tim_users,residents_filtered,ratio`; absent ratio is an
    empty field. Floats use shortest-roundtrip formatting so re-parsing
    gives back identical values."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["zone_id", "tim_users", "residents_filtered", "ratio"])
        for r in records:
            writer.writerow(
                [
                    r.zone_id,
                    repr(r.tim_users),
                    r.residents_filtered,
                    "" if r.ratio is None else repr(r.ratio),
                ]
            )


def read_ratio_csv(path) -> list[RatioRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["zone_id", "tim_users", "residents_filtered", "ratio"]:
            raise SchemaError(f"unexpected ratio CSV header: {header}")
        records = []
        for row in reader:
            records.append(
                RatioRecord(
                    zone_id=row[0],
                    tim_users=float(row[1]),
                    residents_filtered=int(row[2]),
                    ratio=float(row[3]) if row[3] != "" else None,
                )
            )
    return records
