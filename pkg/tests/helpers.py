"""Shared test oracles, independent of the library code paths they check."""

from __future__ import annotations

import math

import numpy as np


def points_in_ring(pts: np.ndarray, ring: np.ndarray) -> np.ndarray:
    """Vectorized ray-casting point-in-polygon test (boundary not guaranteed)."""
    x = pts[:, 0]
    y = pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    n = len(ring)
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % n]
        crosses = (y0 > y) != (y1 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (x < xint)
    return inside


def points_in_polygon(pts: np.ndarray, exterior: np.ndarray, holes=()) -> np.ndarray:
    mask = points_in_ring(pts, exterior)
    for h in holes:
        mask &= ~points_in_ring(pts, np.asarray(h))
    return mask


def jittered_grid_samples(bbox, n_target: int, rng: np.random.Generator) -> np.ndarray:
    """Stratified (jittered-grid) Monte Carlo samples over a bbox."""
    xmin, ymin, xmax, ymax = bbox
    side = int(math.ceil(math.sqrt(n_target)))
    ix, iy = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    u = (ix.ravel() + rng.random(side * side)) / side
    v = (iy.ravel() + rng.random(side * side)) / side
    return np.column_stack([xmin + u * (xmax - xmin), ymin + v * (ymax - ymin)])


def mc_polygon_area(exterior, holes, n_samples: int, rng: np.random.Generator) -> float:
    """Monte Carlo area estimate from uniform bbox sampling."""
    ext = np.asarray(exterior)
    bbox = (ext[:, 0].min(), ext[:, 1].min(), ext[:, 0].max(), ext[:, 1].max())
    xmin, ymin, xmax, ymax = bbox
    pts = np.column_stack(
        [
            rng.uniform(xmin, xmax, n_samples),
            rng.uniform(ymin, ymax, n_samples),
        ]
    )
    frac = points_in_polygon(pts, ext, holes).mean()
    return frac * (xmax - xmin) * (ymax - ymin)


def mc_overlap_weights(exterior, holes, grid, n_target: int, rng: np.random.Generator) -> dict[int, float]:
    """Monte Carlo point-assignment oracle: fraction of in-zone points per cell.

    Stratified sampling keeps the per-cell error well below 1e-3 at
    n_target = 1e6 samples.
    """
    ext = np.asarray(exterior)
    bbox = (ext[:, 0].min(), ext[:, 1].min(), ext[:, 0].max(), ext[:, 1].max())
    pts = jittered_grid_samples(bbox, n_target, rng)
    mask = points_in_polygon(pts, ext, holes)
    pts = pts[mask]
    n_in = len(pts)
    if n_in == 0:
        return {}
    col = np.floor((pts[:, 0] - grid.origin.x) / grid.cell_size).astype(int)
    row = np.floor((pts[:, 1] - grid.origin.y) / grid.cell_size).astype(int)
    ok = (row >= 0) & (row < grid.n_rows) & (col >= 0) & (col < grid.n_cols)
    flat = row[ok] * grid.n_cols + col[ok]
    counts = np.bincount(flat, minlength=grid.n_rows * grid.n_cols)
    return {int(i): counts[i] / n_in for i in np.nonzero(counts)[0]}


def random_star_polygon(
    rng: np.random.Generator,
    center=(0.0, 0.0),
    r_min: float = 0.5,
    r_max: float = 2.0,
    n_vertices: int = 9,
) -> np.ndarray:
    """Random simple polygon, star-shaped around its center.

    Star-shapedness (hence simplicity) requires every circular gap
    between consecutive vertex angles to stay below pi; angle draws are
    rejected until that holds.
    """
    while True:
        angles = np.sort(rng.uniform(0, 2 * math.pi, n_vertices))
        gaps = np.diff(np.concatenate([angles, [angles[0] + 2 * math.pi]]))
        if gaps.max() < 0.95 * math.pi:
            break
    radii = rng.uniform(r_min, r_max, n_vertices)
    return np.column_stack(
        [center[0] + radii * np.cos(angles), center[1] + radii * np.sin(angles)]
    )


def haversine_m(lon1, lat1, lon2, lat2) -> float:
    """Great-circle distance in meters on the 6,371 km sphere."""
    r = 6_371_000.0
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * r * math.asin(math.sqrt(a))


def adjusted_rand_index(labels_a, labels_b) -> float:
    """ARI from the pair-counting contingency table."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    assert a.shape == b.shape
    n = len(a)
    cats_a = {v: i for i, v in enumerate(dict.fromkeys(a.tolist()))}
    cats_b = {v: i for i, v in enumerate(dict.fromkeys(b.tolist()))}
    table = np.zeros((len(cats_a), len(cats_b)), dtype=np.int64)
    for x, y in zip(a.tolist(), b.tolist()):
        table[cats_a[x], cats_b[y]] += 1

    def comb2(v):
        return (v * (v - 1)) // 2

    sum_ij = sum(comb2(int(v)) for v in table.ravel())
    sum_a = sum(comb2(int(v)) for v in table.sum(axis=1))
    sum_b = sum(comb2(int(v)) for v in table.sum(axis=0))
    total = comb2(n)
    expected = sum_a * sum_b / total
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        return 1.0
    return (sum_ij - expected) / (max_index - expected)
