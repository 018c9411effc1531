"""Planar geometry kernel: local projection, polygon areas, rectangle
clipping, and overlap-weight matrices between a regular grid and
irregular zones.

All polygon math is exact shoelace/half-plane arithmetic on planar
coordinates (meters). Geographic input is reduced to the plane through a
local equirectangular projection, which is accurate to ~0.1% at city
scale; geodesic-exact areas are out of scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError

EARTH_RADIUS_M = 6_371_000.0

# Clipped slivers below this fraction of the zone area are noise from
# floating-point clipping and are dropped to keep weights sparse.
WEIGHT_EPS = 1e-12


@dataclass(frozen=True)
class GeoPoint:
    """WGS84 coordinate, degrees east / degrees north."""

    lon: float
    lat: float

    def __post_init__(self):
        if not (-180.0 <= self.lon <= 180.0 and -90.0 <= self.lat <= 90.0):
            raise ValueError(f"geographic coordinate out of range: ({self.lon}, {self.lat})")


@dataclass(frozen=True)
class PlanarPoint:
    """Meters east / north of the projection origin."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("planar coordinate must be finite")


def project(p: GeoPoint, origin: GeoPoint) -> PlanarPoint:
    """Project a geographic point onto a local equirectangular plane.

    x = R * cos(lat0) * dlon, y = R * dlat (radians), R = 6,371,000 m.
    Exact inverse is `unproject`.
    """
    dlon = math.radians(p.lon - origin.lon)
    dlat = math.radians(p.lat - origin.lat)
    return PlanarPoint(
        x=EARTH_RADIUS_M * math.cos(math.radians(origin.lat)) * dlon,
        y=EARTH_RADIUS_M * dlat,
    )


def unproject(p: PlanarPoint, origin: GeoPoint) -> GeoPoint:
    """Inverse of `project` for the same origin."""
    lat = origin.lat + math.degrees(p.y / EARTH_RADIUS_M)
    lon = origin.lon + math.degrees(
        p.x / (EARTH_RADIUS_M * math.cos(math.radians(origin.lat)))
    )
    return GeoPoint(lon=lon, lat=lat)


def _as_ring(points) -> np.ndarray:
    """Normalize a vertex sequence to an open (implicitly closed) ring array."""
    arr = np.asarray(
        [(p.x, p.y) if isinstance(p, PlanarPoint) else (p[0], p[1]) for p in points],
        dtype=float,
    )
    if len(arr) >= 2 and arr[0][0] == arr[-1][0] and arr[0][1] == arr[-1][1]:
        arr = arr[:-1]
    if len(arr) < 3:
        raise DegenerateGeometryError(f"ring needs >= 3 vertices, got {len(arr)}")
    return arr


def _ring_signed_area(ring: np.ndarray) -> float:
    """Shoelace signed area of an implicitly closed ring."""
    x = ring[:, 0]
    y = ring[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True)
class Polygon:
    """Simple polygon with optional holes.

    Rings are stored implicitly closed (first vertex is not repeated);
    explicit closure in the input is normalized away. Holes must lie
    inside the exterior; invalid topology is rejected, never repaired.
    """

    exterior: np.ndarray
    holes: tuple[np.ndarray, ...] = field(default_factory=tuple)

    def __init__(self, exterior, holes=()):
        ext = _as_ring(exterior)
        if len(np.unique(ext, axis=0)) < 3 or abs(_ring_signed_area(ext)) == 0.0:
            raise DegenerateGeometryError("exterior ring has zero area")
        hole_rings = tuple(_as_ring(h) for h in holes)
        exmin, eymin, exmax, eymax = (
            ext[:, 0].min(), ext[:, 1].min(), ext[:, 0].max(), ext[:, 1].max(),
        )
        for h in hole_rings:
            if (
                h[:, 0].min() < exmin or h[:, 0].max() > exmax
                or h[:, 1].min() < eymin or h[:, 1].max() > eymax
            ):
                raise DegenerateGeometryError("hole extends outside the exterior ring")
        object.__setattr__(self, "exterior", ext)
        object.__setattr__(self, "holes", hole_rings)

    def bbox(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the exterior ring."""
        return (
            float(self.exterior[:, 0].min()),
            float(self.exterior[:, 1].min()),
            float(self.exterior[:, 0].max()),
            float(self.exterior[:, 1].max()),
        )

    def translated(self, dx: float, dy: float) -> "Polygon":
        return Polygon(
            self.exterior + np.array([dx, dy]),
            tuple(h + np.array([dx, dy]) for h in self.holes),
        )


def polygon_area(poly: Polygon) -> float:
    """Area in square meters: |shoelace(exterior)| minus hole areas.

    Orientation-independent. Raises DegenerateGeometryError on rings with
    fewer than 3 distinct vertices.
    """
    if len(np.unique(poly.exterior, axis=0)) < 3:
        raise DegenerateGeometryError("exterior ring has < 3 distinct vertices")
    area = abs(_ring_signed_area(poly.exterior))
    for h in poly.holes:
        area -= abs(_ring_signed_area(h))
    return area


def _clip_ring_halfplane(ring: list, axis: int, bound: float, keep_below: bool) -> list:
    """Sutherland-Hodgman step: keep the side of ring with
    coord[axis] <= bound (keep_below) or >= bound."""
    if not ring:
        return []
    out = []
    prev = ring[-1]

    def inside(pt):
        return pt[axis] <= bound if keep_below else pt[axis] >= bound

    def intersect(a, b):
        t = (bound - a[axis]) / (b[axis] - a[axis])
        if axis == 0:
            return (bound, a[1] + t * (b[1] - a[1]))
        return (a[0] + t * (b[0] - a[0]), bound)

    for cur in ring:
        if inside(cur):
            if not inside(prev):
                out.append(intersect(prev, cur))
            out.append(cur)
        elif inside(prev):
            out.append(intersect(prev, cur))
        prev = cur
    return out


def _clip_ring_to_rect(ring: np.ndarray, rect: tuple[float, float, float, float]) -> list:
    xmin, ymin, xmax, ymax = rect
    pts = [tuple(v) for v in ring]
    pts = _clip_ring_halfplane(pts, 0, xmin, keep_below=False)
    pts = _clip_ring_halfplane(pts, 0, xmax, keep_below=True)
    pts = _clip_ring_halfplane(pts, 1, ymin, keep_below=False)
    pts = _clip_ring_halfplane(pts, 1, ymax, keep_below=True)
    return pts


def _ring_list_signed_area(pts: list) -> float:
    if len(pts) < 3:
        return 0.0
    s = 0.0
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def clip_to_rect(poly: Polygon, rect: tuple[float, float, float, float]) -> Polygon | None:
    """Clip a polygon against an axis-aligned rectangle (xmin, ymin, xmax, ymax).

    Each ring is clipped against the rectangle's four half-planes; holes
    are clipped alongside the exterior. Returns None when the
    intersection is empty (or degenerate to zero area). For concave
    inputs the output ring can carry boundary-collinear degenerate
    edges, so area consumers should use `clipped_area`, which is exact
    for any simple polygon.
    """
    if clipped_area(poly, rect) == 0.0:
        return None
    ext = _clip_ring_to_rect(poly.exterior, rect)
    holes = []
    for h in poly.holes:
        hc = _clip_ring_to_rect(h, rect)
        if abs(_ring_list_signed_area(hc)) > 0.0:
            holes.append(hc)
    return Polygon(ext, holes)


def _clamped_ring_area(ring: np.ndarray, rect: tuple[float, float, float, float]) -> float:
    """|area(ring ∩ rect)| via the clamp transform.

    Mapping every boundary point through the rectangle's nearest-point
    projection keeps the winding number of interior points unchanged
    (the projection segment of an outside point never enters the box),
    so the shoelace of the clamped curve equals the intersection area.
    Unlike Sutherland-Hodgman this stays exact for concave polygons,
    whose clipped rings may self-overlap. Bend points are inserted where
    an edge crosses a clamp breakline.
    """
    xmin, ymin, xmax, ymax = rect

    def clamp(x, y):
        return (min(max(x, xmin), xmax), min(max(y, ymin), ymax))

    pts: list[tuple[float, float]] = []
    n = len(ring)
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % n]
        ts = [0.0]
        dx = x1 - x0
        dy = y1 - y0
        if dx != 0.0:
            for bound in (xmin, xmax):
                t = (bound - x0) / dx
                if 0.0 < t < 1.0:
                    ts.append(t)
        if dy != 0.0:
            for bound in (ymin, ymax):
                t = (bound - y0) / dy
                if 0.0 < t < 1.0:
                    ts.append(t)
        for t in sorted(ts):
            pts.append(clamp(x0 + t * dx, y0 + t * dy))
    return abs(_ring_list_signed_area(pts))


def clipped_area(poly: Polygon, rect: tuple[float, float, float, float]) -> float:
    """Area of poly ∩ rect, exact for arbitrary simple polygons."""
    area = _clamped_ring_area(poly.exterior, rect)
    for h in poly.holes:
        area -= _clamped_ring_area(h, rect)
    return area


@dataclass(frozen=True)
class GridSpec:
    """Uniform square-cell lattice. Cell (r, c) occupies
    [origin.x + c*s, origin.x + (c+1)*s] x [origin.y + r*s, origin.y + (r+1)*s].
    """

    origin: PlanarPoint
    cell_size: float
    n_rows: int
    n_cols: int

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError("grid must have at least one cell")

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def cell_area(self) -> float:
        return self.cell_size * self.cell_size

    def cell_rect(self, row: int, col: int) -> tuple[float, float, float, float]:
        s = self.cell_size
        x0 = self.origin.x + col * s
        y0 = self.origin.y + row * s
        return (x0, y0, x0 + s, y0 + s)

    def flat_index(self, row: int, col: int) -> int:
        return row * self.n_cols + col

    def extent(self) -> tuple[float, float, float, float]:
        return (
            self.origin.x,
            self.origin.y,
            self.origin.x + self.n_cols * self.cell_size,
            self.origin.y + self.n_rows * self.cell_size,
        )

    def candidate_cells(
        self, bbox: tuple[float, float, float, float]
    ) -> tuple[range, range]:
        """Row/col index ranges of cells whose rectangles can intersect bbox.

        The lattice is regular, so the candidate set is a direct index
        range computation; no spatial tree is needed.
        """
        xmin, ymin, xmax, ymax = bbox
        s = self.cell_size
        c0 = max(0, int(math.floor((xmin - self.origin.x) / s)))
        c1 = min(self.n_cols, int(math.floor((xmax - self.origin.x) / s)) + 1)
        r0 = max(0, int(math.floor((ymin - self.origin.y) / s)))
        r1 = min(self.n_rows, int(math.floor((ymax - self.origin.y) / s)) + 1)
        return range(r0, max(r0, r1)), range(c0, max(c0, c1))


@dataclass(frozen=True)
class OverlapWeights:
    """Sparse per-zone weights: fraction of the zone's area inside each cell.

    covered_fraction is the weight sum, i.e. the fraction of the zone
    lying inside the grid extent (1 for fully interior zones).
    grid_shape pins the lattice the indices refer to, so consumers can
    detect weight/frame mismatches.
    """

    zone_id: str
    entries: tuple[tuple[int, float], ...]
    covered_fraction: float
    grid_shape: tuple[int, int]


def overlap_weights(zone: Polygon, grid: GridSpec, zone_id: str = "") -> OverlapWeights:
    """Fraction of the zone's area falling in each grid cell.

    weight(cell) = area(zone ∩ cell) / area(zone), for every cell whose
    rectangle can intersect the zone's bounding box. Slivers below
    WEIGHT_EPS are dropped.
    """
    zone_area = polygon_area(zone)
    if zone_area <= 0.0:
        raise DegenerateGeometryError("zone has zero area")
    rows, cols = grid.candidate_cells(zone.bbox())
    entries = []
    total = 0.0
    for r in rows:
        for c in cols:
            a = clipped_area(zone, grid.cell_rect(r, c))
            w = a / zone_area
            if w >= WEIGHT_EPS:
                w = min(w, 1.0)
                entries.append((grid.flat_index(r, c), w))
                total += w
    # snap to exactly 1 for fully interior zones (float noise aside)
    covered = 1.0 if abs(total - 1.0) <= 1e-9 else total
    return OverlapWeights(
        zone_id=zone_id,
        entries=tuple(entries),
        covered_fraction=covered,
        grid_shape=(grid.n_rows, grid.n_cols),
    )


def rect_polygon(xmin: float, ymin: float, xmax: float, ymax: float) -> Polygon:
    """Axis-aligned rectangle as a Polygon (CCW)."""
    return Polygon([(xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)])
