"""Histogram-of-oriented-gradients features for standardized density
frames, plus daily stacking.

Gradients are centered differences with replicated borders; orientations
are unsigned (0-180 degrees) with magnitude-weighted linear interpolation
between adjacent bins (wrapping at 180); block descriptors are
L2-normalized. Offsets cancel in the gradient, so features depend only on
spatial structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import SchemaError
from .griddata import QUARTERS_PER_DAY


@dataclass(frozen=True)
class HogParams:
    cell_px: int = 3
    block_cells: int = 2
    block_stride: int = 1
    n_bins: int = 9
    norm_epsilon: float = 1e-6

    def __post_init__(self):
        if min(self.cell_px, self.block_cells, self.block_stride, self.n_bins) < 1:
            raise ValueError("HOG parameters must be positive")
        if self.norm_epsilon <= 0:
            raise ValueError("norm_epsilon must be positive")


@dataclass(frozen=True)
class HogLayout:
    n_blocks_y: int
    n_blocks_x: int
    block_cells: int
    n_bins: int

    @property
    def length(self) -> int:
        return self.n_blocks_y * self.n_blocks_x * self.block_cells**2 * self.n_bins


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    layout: HogLayout


@dataclass(frozen=True)
class DailyFeatureVector:
    day_id: str
    values: np.ndarray


def hog_layout(shape: tuple[int, int], params: HogParams) -> HogLayout:
    """Block layout for a frame shape; raises if smaller than one block."""
    rows, cols = shape
    n_cy = rows // params.cell_px
    n_cx = cols // params.cell_px
    if n_cy < params.block_cells or n_cx < params.block_cells:
        raise SchemaError(
            f"frame {rows}x{cols} smaller than one {params.block_cells}-cell block "
            f"of {params.cell_px}-px cells"
        )
    nby = (n_cy - params.block_cells) // params.block_stride + 1
    nbx = (n_cx - params.block_cells) // params.block_stride + 1
    return HogLayout(nby, nbx, params.block_cells, params.n_bins)


def _gradients(frames: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Centered differences with replicated borders on the last two axes."""
    pad_x = [(0, 0)] * (frames.ndim - 1) + [(1, 1)]
    pad_y = [(0, 0)] * (frames.ndim - 2) + [(1, 1), (0, 0)]
    px = np.pad(frames, pad_x, mode="edge")
    py = np.pad(frames, pad_y, mode="edge")
    gx = (px[..., 2:] - px[..., :-2]) / 2.0
    gy = (py[..., 2:, :] - py[..., :-2, :]) / 2.0
    return gx, gy


def batched_cell_histograms(frames: np.ndarray, params: HogParams) -> np.ndarray:
    """(batch, n_cells_y, n_cells_x, n_bins) orientation histograms.

    Each pixel votes its gradient magnitude, split linearly between the
    two nearest orientation bins (bin centers at k * 180/n_bins degrees,
    wrapping at 180), so the votes of a pixel always sum to its magnitude.
    """
    frames = np.asarray(frames, dtype=float)
    batch, rows, cols = frames.shape
    cp = params.cell_px
    n_cy, n_cx = rows // cp, cols // cp
    cropped_r, cropped_c = n_cy * cp, n_cx * cp

    gx, gy = _gradients(frames)
    gx = gx[:, :cropped_r, :cropped_c]
    gy = gy[:, :cropped_r, :cropped_c]
    mag = np.hypot(gx, gy)
    theta = np.degrees(np.arctan2(gy, gx)) % 180.0

    nb = params.n_bins
    u = theta / (180.0 / nb)
    k0 = np.floor(u).astype(np.int64) % nb
    frac = u - np.floor(u)
    k1 = (k0 + 1) % nb

    # flat histogram index: ((batch * n_cy + ci) * n_cx + cj) * n_bins + k
    ci = np.arange(cropped_r) // cp
    cj = np.arange(cropped_c) // cp
    base = (
        np.arange(batch)[:, None, None] * (n_cy * n_cx)
        + ci[None, :, None] * n_cx
        + cj[None, None, :]
    ) * nb
    size = batch * n_cy * n_cx * nb
    hist = np.bincount(
        (base + k0).ravel(), weights=(mag * (1.0 - frac)).ravel(), minlength=size
    )
    hist += np.bincount(
        (base + k1).ravel(), weights=(mag * frac).ravel(), minlength=size
    )
    return hist.reshape(batch, n_cy, n_cx, nb)


def cell_histograms(frame: np.ndarray, params: HogParams) -> np.ndarray:
    """(n_cells_y, n_cells_x, n_bins) histograms of a single frame."""
    return batched_cell_histograms(np.asarray(frame, dtype=float)[None], params)[0]


def _normalized_blocks(hists: np.ndarray, params: HogParams) -> np.ndarray:
    """(batch, n_features) block descriptors from cell histograms."""
    bc, stride, eps = params.block_cells, params.block_stride, params.norm_epsilon
    windows = sliding_window_view(hists, (bc, bc), axis=(1, 2))
    windows = windows[:, ::stride, ::stride]
    # -> (batch, nby, nbx, bc, bc, n_bins), matching row-major cell order
    blocks = np.ascontiguousarray(windows.transpose(0, 1, 2, 4, 5, 3))
    batch, nby, nbx = blocks.shape[:3]
    flat = blocks.reshape(batch, nby, nbx, -1)
    norms = np.sqrt(np.sum(flat * flat, axis=-1) + eps * eps)
    return (flat / norms[..., None]).reshape(batch, -1)


def hog_batch(frames: np.ndarray, params: HogParams | None = None) -> np.ndarray:
    """(batch, n_features) descriptors for a stack of equally sized frames."""
    params = params or HogParams()
    frames = np.asarray(frames, dtype=float)
    hog_layout(frames.shape[-2:], params)  # validates size
    hists = batched_cell_histograms(frames, params)
    return _normalized_blocks(hists, params)


def hog(frame: np.ndarray, params: HogParams | None = None) -> FeatureVector:
    """Extract the block-normalized HOG descriptor of one frame."""
    params = params or HogParams()
    layout = hog_layout(np.asarray(frame).shape, params)
    values = hog_batch(np.asarray(frame, dtype=float)[None], params)[0]
    return FeatureVector(values=values, layout=layout)


def stack_daily(day_id: str, features: list[FeatureVector]) -> DailyFeatureVector:
    """Concatenate the 96 per-quarter descriptors in quarter order."""
    if len(features) != QUARTERS_PER_DAY:
        raise SchemaError(
            f"expected {QUARTERS_PER_DAY} per-quarter vectors, got {len(features)}"
        )
    lengths = {len(f.values) for f in features}
    if len(lengths) != 1:
        raise SchemaError(f"per-quarter vectors differ in length: {sorted(lengths)}")
    return DailyFeatureVector(
        day_id=day_id, values=np.concatenate([f.values for f in features])
    )


def daily_features(
    std_days, params: HogParams | None = None
) -> list[DailyFeatureVector]:
    """HOG-stack every day of a standardized series."""
    params = params or HogParams()
    out = []
    for day in std_days:
        if day.values.shape[0] != QUARTERS_PER_DAY:
            raise SchemaError(
                f"day {day.date}: expected {QUARTERS_PER_DAY} frames"
            )
        out.append(
            DailyFeatureVector(day.date, hog_batch(day.values, params).ravel())
        )
    return out
