"""Band-depth ordering and functional boxplots for daily profile curves.

Depth is the modified band depth with two-curve bands: the average over
all curve pairs of the fraction of quarters a curve spends inside the
pair's envelope. The boxplot takes the deepest curve as median, the
envelope of the deepest half as central region, fences at 1.5x the
region height, and flags curves beyond a fence at any quarter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .griddata import DDPCurve

MIN_GROUP_SIZE = 5
FENCE_FACTOR = 1.5


def mbd(curves: np.ndarray) -> np.ndarray:
    """Modified band depth (2-curve bands) for an (n, T) curve matrix.

    Uses the rank identity: at each time point, the number of pairs whose
    envelope covers a value with `a` values strictly below and `b`
    strictly above is C(n,2) - C(a,2) - C(b,2). Ties count as covered,
    matching the min/max band definition exactly.
    """
    data = np.asarray(curves, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError("band depth needs an (n >= 2, T) curve matrix")
    n, t = data.shape
    pairs = n * (n - 1) / 2.0
    covered = np.zeros((n, t))
    for j in range(t):
        col = data[:, j]
        order = np.sort(col)
        below = np.searchsorted(order, col, side="left")
        above = n - np.searchsorted(order, col, side="right")
        covered[:, j] = pairs - below * (below - 1) / 2.0 - above * (above - 1) / 2.0
    return covered.mean(axis=1) / pairs


@dataclass
class FunctionalBoxplot:
    median_id: str
    median_curve: np.ndarray
    region_lower: np.ndarray
    region_upper: np.ndarray
    fence_lower: np.ndarray
    fence_upper: np.ndarray
    whisker_lower: np.ndarray
    whisker_upper: np.ndarray
    outlier_ids: list[str]
    depths: dict[str, float]


@dataclass
class RawCurveBundle:
    """Fallback for groups too small for a meaningful boxplot."""

    ids: list[str]
    curves: dict[str, np.ndarray]


def functional_boxplot(
    curves: list[DDPCurve], factor: float = FENCE_FACTOR
) -> FunctionalBoxplot | RawCurveBundle:
    """Boxplot of a curve group; groups under 5 curves come back as a raw
    bundle instead (signal, not failure).

    The median is the deepest observed curve (depth ties break toward the
    smaller id); the central region is the pointwise envelope of the
    ceil(n/2) deepest curves; fences inflate the region by `factor` times
    its height; whiskers are the pointwise extremes of the non-outliers.
    """
    ids = [c.day_id for c in curves]
    if len(set(ids)) != len(ids):
        raise ValueError("curve ids must be unique")
    if len(curves) < MIN_GROUP_SIZE:
        return RawCurveBundle(ids=ids, curves={c.day_id: c.values for c in curves})

    data = np.stack([c.values for c in curves])
    depths = mbd(data)
    # order by depth descending, id ascending for ties
    order = sorted(range(len(ids)), key=lambda i: (-depths[i], ids[i]))
    median_i = order[0]
    half = order[: (len(ids) + 1) // 2]
    region_lower = data[half].min(axis=0)
    region_upper = data[half].max(axis=0)
    height = region_upper - region_lower
    fence_lower = region_lower - factor * height
    fence_upper = region_upper + factor * height

    outside = np.any((data < fence_lower) | (data > fence_upper), axis=1)
    outlier_ids = sorted(ids[i] for i in np.nonzero(outside)[0])
    inliers = data[~outside]

    return FunctionalBoxplot(
        median_id=ids[median_i],
        median_curve=data[median_i],
        region_lower=region_lower,
        region_upper=region_upper,
        fence_lower=fence_lower,
        fence_upper=fence_upper,
        whisker_lower=inliers.min(axis=0),
        whisker_upper=inliers.max(axis=0),
        outlier_ids=outlier_ids,
        depths={ids[i]: float(depths[i]) for i in range(len(ids))},
    )


def split_by_month(curves: list[DDPCurve]) -> dict[str, list[DDPCurve]]:
    """Group curves by their day id's YYYY-MM prefix."""
    months: dict[str, list[DDPCurve]] = {}
    for c in curves:
        months.setdefault(c.day_id[:7], []).append(c)
    return dict(sorted(months.items()))


def boxplot_to_dict(result: FunctionalBoxplot | RawCurveBundle) -> dict:
    """JSON-ready form; the `kind` field tells the two result types apart."""
    if isinstance(result, RawCurveBundle):
        return {
            "kind": "raw_bundle",
            "ids": result.ids,
            "curves": {k: v.tolist() for k, v in result.curves.items()},
        }
    return {
        "kind": "boxplot",
        "median_id": result.median_id,
        "median": result.median_curve.tolist(),
        "region_lower": result.region_lower.tolist(),
        "region_upper": result.region_upper.tolist(),
        "fence_lower": result.fence_lower.tolist(),
        "fence_upper": result.fence_upper.tolist(),
        "whisker_lower": result.whisker_lower.tolist(),
        "whisker_upper": result.whisker_upper.tolist(),
        "outlier_ids": result.outlier_ids,
        "depths": result.depths,
    }


def render_boxplot_svg(
    result: FunctionalBoxplot,
    curves: list[DDPCurve] | None = None,
    width: int = 860,
    height: int = 420,
    title: str = "",
) -> str:
    """Deterministic standalone SVG: shaded central region, median,
    fences, and outlier curves."""
    pad = 48
    t = np.arange(96)
    y_candidates = [result.fence_lower, result.fence_upper]
    outlier_map = {}
    if curves:
        outlier_map = {
            c.day_id: c.values for c in curves if c.day_id in set(result.outlier_ids)
        }
        y_candidates.extend(outlier_map.values())
    ymin = float(min(arr.min() for arr in y_candidates))
    ymax = float(max(arr.max() for arr in y_candidates))
    span = (ymax - ymin) or 1.0

    def sx(q):
        return pad + (width - 2 * pad) * q / 95.0

    def sy(v):
        return height - pad - (height - 2 * pad) * (v - ymin) / span

    def path(values):
        return " ".join(
            f"{'M' if i == 0 else 'L'} {sx(i):.2f} {sy(v):.2f}"
            for i, v in enumerate(values)
        )

    upper_pts = [f"{sx(i):.2f},{sy(v):.2f}" for i, v in enumerate(result.region_upper)]
    lower_pts = [
        f"{sx(95 - i):.2f},{sy(v):.2f}" for i, v in enumerate(result.region_lower[::-1])
    ]
    region_points = " ".join(upper_pts + lower_pts)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<polygon points="{region_points}" fill="#b39ddb" stroke="none" opacity="0.8"/>',
        f'<path d="{path(result.fence_lower)}" fill="none" stroke="#1565c0" stroke-width="1.5"/>',
        f'<path d="{path(result.fence_upper)}" fill="none" stroke="#1565c0" stroke-width="1.5"/>',
    ]
    for day_id in result.outlier_ids:
        if day_id in outlier_map:
            parts.append(
                f'<path d="{path(outlier_map[day_id])}" fill="none" '
                f'stroke="#c62828" stroke-width="1"/>'
            )
    parts.append(
        f'<path d="{path(result.median_curve)}" fill="none" stroke="black" stroke-width="2"/>'
    )
    if title:
        parts.append(
            f'<text x="{pad}" y="24" font-family="sans-serif" font-size="14">{title}</text>'
        )
    parts.append(
        f'<text x="{width // 2}" y="{height - 12}" font-family="sans-serif" '
        f'font-size="12" text-anchor="middle">quarter of day</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts)
