"""Grid time-series model, CSV ingestion, standardization, daily density
profiles, and a calibrated synthetic generator.

A series holds whole days of 96 quarter-hour frames over one GridSpec.
Raw values are average simultaneously connected phones per cell
(non-negative reals); days missing any quarter are rejected at ingestion.
"""

from __future__ import annotations

import csv
import gzip
import io
import logging
import math
from dataclasses import dataclass, field
from datetime import date as date_type, timedelta

import numpy as np

from .errors import BoundsError, ConfigError, EmptyInputError, ParseError, SchemaError
from .geo import GridSpec, PlanarPoint

log = logging.getLogger(__name__)

QUARTERS_PER_DAY = 96

CSV_HEADER = ["date", "quarter", "row", "col", "value"]


@dataclass(frozen=True)
class DayRecord:
    """One day of frames: values has shape (96, n_rows, n_cols)."""

    date: str
    values: np.ndarray


@dataclass(frozen=True)
class GridFrame:
    """Single quarter-hour snapshot."""

    date: str
    quarter: int
    values: np.ndarray


@dataclass
class GridSeries:
    grid: GridSpec
    days: list[DayRecord]
    metadata: dict = field(default_factory=dict)

    @property
    def day_ids(self) -> list[str]:
        return [d.date for d in self.days]

    def day(self, day_id: str) -> DayRecord:
        for d in self.days:
            if d.date == day_id:
                return d
        raise KeyError(f"no such day: {day_id}")

    def frame(self, day_id: str, quarter: int) -> GridFrame:
        if not (0 <= quarter < QUARTERS_PER_DAY):
            raise BoundsError(f"quarter {quarter} outside [0, 95]")
        return GridFrame(day_id, quarter, self.day(day_id).values[quarter])


@dataclass
class StandardizedSeries:
    """Series rescaled to [0, 100]; same day/quarter layout as the source."""

    grid: GridSpec
    days: list[DayRecord]
    vmin: float
    vmax: float
    mode: str


@dataclass(frozen=True)
class DDPCurve:
    """Daily density profile: 96 per-quarter totals over a region."""

    day_id: str
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (QUARTERS_PER_DAY,):
            raise SchemaError(f"DDP curve must have {QUARTERS_PER_DAY} values")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise SchemaError("DDP values must be finite and non-negative")


@dataclass(frozen=True)
class CellRegion:
    """Half-open rectangular cell-index range [row0, row1) x [col0, col1)."""

    row0: int
    row1: int
    col0: int
    col1: int

    def validate(self, grid: GridSpec) -> None:
        if not (
            0 <= self.row0 < self.row1 <= grid.n_rows
            and 0 <= self.col0 < self.col1 <= grid.n_cols
        ):
            raise BoundsError(
                f"region {self} outside grid {grid.n_rows}x{grid.n_cols}"
            )


def _open_maybe_gzip(path, mode="rt"):
    if str(path).endswith(".gz"):
        return gzip.open(path, mode)
    return open(path, mode)


def load_series(path, grid: GridSpec) -> tuple[GridSeries, int]:
    """Load a grid CSV (`date,quarter,row,col,value`, gzip by extension).

    Cells absent from a present quarter are zero (sparse encoding);
    duplicate cell rows accumulate. Days missing any quarter are dropped
    with a warning; the count of dropped days is returned alongside the
    series.
    """
    day_values: dict[str, np.ndarray] = {}
    day_quarters: dict[str, set[int]] = {}
    with _open_maybe_gzip(path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty grid file") from None
        if [h.strip() for h in header] != CSV_HEADER:
            raise SchemaError(f"expected header {CSV_HEADER}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ParseError(f"expected 5 fields, got {len(row)}", line=lineno)
            day, q_s, r_s, c_s, v_s = row
            try:
                q, r, c = int(q_s), int(r_s), int(c_s)
                v = float(v_s)
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            if not (0 <= q < QUARTERS_PER_DAY):
                raise ParseError(f"quarter {q} outside [0, 95]", line=lineno)
            if not (0 <= r < grid.n_rows and 0 <= c < grid.n_cols):
                raise SchemaError(
                    f"line {lineno}: cell ({r}, {c}) outside "
                    f"{grid.n_rows}x{grid.n_cols} grid"
                )
            if not math.isfinite(v) or v < 0:
                raise ParseError(f"value {v_s} must be finite and >= 0", line=lineno)
            if day not in day_values:
                day_values[day] = np.zeros(
                    (QUARTERS_PER_DAY, grid.n_rows, grid.n_cols)
                )
                day_quarters[day] = set()
            day_values[day][q, r, c] += v
            day_quarters[day].add(q)

    days = []
    dropped = 0
    for day in sorted(day_values):
        if len(day_quarters[day]) < QUARTERS_PER_DAY:
            missing = QUARTERS_PER_DAY - len(day_quarters[day])
            log.warning("dropping day %s: %d quarters missing", day, missing)
            dropped += 1
            continue
        days.append(DayRecord(date=day, values=day_values[day]))
    return GridSeries(grid=grid, days=days, metadata={"source": str(path)}), dropped


def write_series_csv(series: GridSeries, path) -> None:
    """Emit the sparse grid CSV (zero cells omitted), gzip by extension.

    Output bytes are a pure function of the series (gzip mtime pinned),
    so identical series produce identical files.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for day in series.days:
        for q in range(QUARTERS_PER_DAY):
            frame = day.values[q]
            rows, cols = np.nonzero(frame)
            for r, c in zip(rows.tolist(), cols.tolist()):
                v = frame[r, c]
                v_out = int(v) if float(v).is_integer() else float(v)
                writer.writerow([day.date, q, r, c, v_out])
    data = buf.getvalue().encode()
    if str(path).endswith(".gz"):
        # pin mtime and omit the filename so identical series give
        # identical bytes regardless of when/where they are written
        with open(path, "wb") as raw:
            with gzip.GzipFile(filename="", fileobj=raw, mode="wb", mtime=0) as gz:
                gz.write(data)
    else:
        with open(path, "wb") as fh:
            fh.write(data)


def standardize(series: GridSeries, mode: str = "global") -> StandardizedSeries:
    """Affine rescale to [0, 100]: Z = 100 * (X - m) / (M - m).

    mode="global" (default) uses the min/max over all days and quarters so
    amplitude differences between frames survive; mode="per_frame"
    rescales each frame independently. A constant input maps to all
    zeros.
    """
    if not series.days:
        raise EmptyInputError("cannot standardize an empty series")
    if mode not in ("global", "per_frame"):
        raise ValueError(f"unknown standardization mode: {mode}")
    if mode == "global":
        vmin = min(float(d.values.min()) for d in series.days)
        vmax = max(float(d.values.max()) for d in series.days)
        span = vmax - vmin
        days = []
        for d in series.days:
            if span == 0.0:
                z = np.zeros_like(d.values)
            else:
                z = 100.0 * (d.values - vmin) / span
            days.append(DayRecord(d.date, z))
        return StandardizedSeries(series.grid, days, vmin, vmax, mode)
    days = []
    for d in series.days:
        z = np.empty_like(d.values, dtype=float)
        for q in range(QUARTERS_PER_DAY):
            f = d.values[q]
            span = float(f.max() - f.min())
            z[q] = 0.0 if span == 0.0 else 100.0 * (f - f.min()) / span
        days.append(DayRecord(d.date, z))
    return StandardizedSeries(series.grid, days, float("nan"), float("nan"), mode)


def compute_ddp(series: GridSeries, region: CellRegion | None = None) -> list[DDPCurve]:
    """One curve per day: per-quarter sum of raw cell values in the region.

    Raw (person) values feed DDPs; standardized values are for feature
    extraction only.
    """
    if region is None:
        region = CellRegion(0, series.grid.n_rows, 0, series.grid.n_cols)
    region.validate(series.grid)
    curves = []
    for d in series.days:
        block = d.values[:, region.row0 : region.row1, region.col0 : region.col1]
        curves.append(DDPCurve(d.date, block.sum(axis=(1, 2))))
    return curves


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AwayWindow:
    """Daytime relocation window: a `depth` fraction of users is away at
    the `target` activity block, with cosine ramps of `ramp_h` hours."""

    start_h: float
    end_h: float
    ramp_h: float
    depth: float
    target: str

    def profile(self) -> np.ndarray:
        """Away fraction per quarter (96 values in [0, depth])."""
        h = np.arange(QUARTERS_PER_DAY) / 4.0
        s = np.zeros(QUARTERS_PER_DAY)
        rising = (h > self.start_h) & (h < self.start_h + self.ramp_h)
        s[rising] = 0.5 * (1 - np.cos(np.pi * (h[rising] - self.start_h) / self.ramp_h))
        plateau = (h >= self.start_h + self.ramp_h) & (h <= self.end_h - self.ramp_h)
        s[plateau] = 1.0
        falling = (h > self.end_h - self.ramp_h) & (h < self.end_h)
        s[falling] = 0.5 * (1 - np.cos(np.pi * (self.end_h - h[falling]) / self.ramp_h))
        return self.depth * s


@dataclass(frozen=True)
class RegimeSpec:
    name: str
    weight: float
    away_windows: tuple[AwayWindow, ...] = ()


@dataclass(frozen=True)
class ZoneLayout:
    """Cell-aligned rectangular zone [row0, row1) x [col0, col1)."""

    zone_id: str
    row0: int
    row1: int
    col0: int
    col1: int
    population: int
    under11: int
    over80: int
    land_use: str = "residential"

    @property
    def filtered(self) -> int:
        return self.population - self.under11 - self.over80

    def cells(self) -> list[tuple[int, int]]:
        return [
            (r, c)
            for r in range(self.row0, self.row1)
            for c in range(self.col0, self.col1)
        ]


@dataclass(frozen=True)
class SynthConfig:
    grid: GridSpec
    n_days: int
    regimes: tuple[RegimeSpec, ...]
    zones: tuple[ZoneLayout, ...]
    antennas: tuple[tuple[int, int], ...]
    activity_blocks: dict[str, tuple[int, int, int, int]]
    p: float
    q: float
    seed: int
    start_date: str = "2016-06-01"
    connectivity_night: float = 0.62
    home_weight_spread: float = 0.4
    poisson_noise: bool = True
    # Erlang values are quarter-hour averages of repeated connection
    # counts, so cell noise variance is lambda / erlang_samples
    erlang_samples: int = 15
    region_hints: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        if not (0.0 < self.p < 1.0):
            raise ConfigError("penetration p must be in (0, 1)")
        if not (0.0 <= self.q <= 1.0):
            raise ConfigError("displacement q must be in [0, 1]")
        if self.n_days < 1:
            raise ConfigError("n_days must be >= 1")
        for z in self.zones:
            if not (
                0 <= z.row0 < z.row1 <= self.grid.n_rows
                and 0 <= z.col0 < z.col1 <= self.grid.n_cols
            ):
                raise ConfigError(f"zone {z.zone_id} outside the grid")
            if z.under11 + z.over80 > z.population:
                raise ConfigError(f"zone {z.zone_id}: age bands exceed population")
        for r, c in self.antennas:
            if not (0 <= r < self.grid.n_rows and 0 <= c < self.grid.n_cols):
                raise ConfigError(f"antenna cell ({r}, {c}) outside the grid")


def connectivity_curve(night_floor: float) -> np.ndarray:
    """Fraction of phones connected per quarter: 1.0 from 07:30 to 22:30,
    dipping to the night floor between 01:30 and 04:30 with cosine ramps."""
    h = np.arange(QUARTERS_PER_DAY) / 4.0
    alpha = np.ones(QUARTERS_PER_DAY)
    span = 1.0 - night_floor
    late = h > 22.5  # down-ramp 22:30 -> 01:30 (wraps midnight)
    alpha[late] = night_floor + span * 0.5 * (1 + np.cos(np.pi * (h[late] - 22.5) / 3.0))
    early = h < 1.5
    alpha[early] = night_floor + span * 0.5 * (1 + np.cos(np.pi * (h[early] + 1.5) / 3.0))
    low = (h >= 1.5) & (h <= 4.5)
    alpha[low] = night_floor
    rise = (h > 4.5) & (h < 7.5)
    alpha[rise] = night_floor + span * 0.5 * (1 - np.cos(np.pi * (h[rise] - 4.5) / 3.0))
    return alpha


@dataclass
class SynthResult:
    series: GridSeries
    ground_truth: dict


def _nearest_antenna_map(grid: GridSpec, antennas) -> np.ndarray:
    """(n_rows, n_cols, 2) array of the nearest antenna cell per cell.

    Ties break toward the first antenna in the tuple, keeping the map
    deterministic.
    """
    rows = np.arange(grid.n_rows)[:, None]
    cols = np.arange(grid.n_cols)[None, :]
    dists = np.stack(
        [(rows - ar) ** 2 + (cols - ac) ** 2 for ar, ac in antennas], axis=0
    )
    idx = np.argmin(dists, axis=0)
    return np.asarray(antennas)[idx]


def synth_generate(cfg: SynthConfig) -> SynthResult:
    """Generate a deterministic synthetic series plus ground truth.

    Each zone's operator users are a binomial draw (penetration p) from
    its phone-eligible residents (total minus under-11 and over-80).
    Users get a home cell inside their zone; with probability q the home
    observation snaps to the nearest antenna cell. Daytime relocation
    follows the day's regime windows; a connectivity curve modulates the
    total; per-cell Poisson noise is applied last.
    """
    rng = np.random.default_rng(cfg.seed)
    R, C = cfg.grid.n_rows, cfg.grid.n_cols

    weights_sum = sum(r.weight for r in cfg.regimes)
    if not cfg.regimes or weights_sum <= 0:
        raise ConfigError("regime mixture must have positive total weight")

    nearest = _nearest_antenna_map(cfg.grid, cfg.antennas) if cfg.antennas else None
    if nearest is None and cfg.q > 0:
        raise ConfigError("displacement q > 0 requires antenna positions")

    home_hist = np.zeros((R, C))
    zone_truth = []
    total_users = 0
    for z in cfg.zones:
        users = int(rng.binomial(z.filtered, cfg.p)) if z.filtered > 0 else 0
        total_users += users
        cells = z.cells()
        w = rng.uniform(1.0 - cfg.home_weight_spread, 1.0 + cfg.home_weight_spread, len(cells))
        w /= w.sum()
        counts = rng.multinomial(users, w)
        for (r, c), n in zip(cells, counts.tolist()):
            if n == 0:
                continue
            moved = int(rng.binomial(n, cfg.q)) if cfg.q > 0 else 0
            home_hist[r, c] += n - moved
            if moved:
                ar, ac = nearest[r, c]
                home_hist[ar, ac] += moved
        zone_truth.append(
            {
                "zone_id": z.zone_id,
                "population": z.population,
                "under11": z.under11,
                "over80": z.over80,
                "filtered": z.filtered,
                "users": users,
                "land_use": z.land_use,
            }
        )

    block_hists = {}
    for name, (r0, r1, c0, c1) in cfg.activity_blocks.items():
        h = np.zeros((R, C))
        h[r0:r1, c0:c1] = 1.0 / ((r1 - r0) * (c1 - c0))
        block_hists[name] = h

    alpha = connectivity_curve(cfg.connectivity_night)
    regime_names = [r.name for r in cfg.regimes]
    probs = np.asarray([r.weight for r in cfg.regimes]) / weights_sum

    # per-regime (96,) away profiles per target block
    regime_profiles = {}
    for reg in cfg.regimes:
        parts = []
        for w in reg.away_windows:
            if w.target not in block_hists:
                raise ConfigError(f"unknown activity block: {w.target}")
            parts.append((w.profile(), block_hists[w.target]))
        regime_profiles[reg.name] = parts

    start = date_type.fromisoformat(cfg.start_date)
    days = []
    day_regimes = []
    for i in range(cfg.n_days):
        regime = regime_names[int(rng.choice(len(regime_names), p=probs))]
        away_total = np.zeros(QUARTERS_PER_DAY)
        away_field = np.zeros((QUARTERS_PER_DAY, R, C))
        for profile, hist in regime_profiles[regime]:
            away_total += profile
            away_field += profile[:, None, None] * hist[None, :, :]
        if np.any(away_total > 1.0 + 1e-9):
            raise ConfigError(f"regime {regime}: away fractions exceed 1")
        home_frac = 1.0 - away_total
        expected = alpha[:, None, None] * (
            home_frac[:, None, None] * home_hist[None, :, :]
            + total_users * away_field
        )
        if cfg.poisson_noise:
            m = cfg.erlang_samples
            values = rng.poisson(expected * m).astype(float) / m
        else:
            values = expected
        day_id = (start + timedelta(days=i)).isoformat()
        days.append(DayRecord(date=day_id, values=values))
        day_regimes.append({"date": day_id, "regime": regime})

    series = GridSeries(
        grid=cfg.grid,
        days=days,
        metadata={"source": "synthetic", "seed": cfg.seed},
    )
    truth = {
        "true_p": cfg.p,
        "displacement_q": cfg.q,
        "seed": cfg.seed,
        "total_users": total_users,
        "zones": zone_truth,
        "day_regimes": day_regimes,
        "antennas": [list(a) for a in cfg.antennas],
        "region_hints": [list(g) for g in cfg.region_hints],
        "connectivity_night": cfg.connectivity_night,
    }
    return SynthResult(series=series, ground_truth=truth)


DEFAULT_REGIMES = (
    RegimeSpec(
        "weekday",
        0.55,
        (AwayWindow(8.0, 18.5, 1.5, 0.55, "business"),),
    ),
    RegimeSpec(
        "weekend",
        0.30,
        (AwayWindow(10.5, 17.0, 1.5, 0.35, "leisure"),),
    ),
    RegimeSpec(
        "event",
        0.15,
        # festival day: the venue draws people from midday, peaking in
        # the evening, emptying before the 21:00 residential snapshot
        (
            AwayWindow(10.5, 16.0, 1.5, 0.30, "event"),
            AwayWindow(16.5, 20.75, 1.0, 0.50, "event"),
        ),
    ),
)


def synthetic_city_config(
    seed: int,
    n_days: int,
    q: float,
    p: float = 0.30,
    block_grid: tuple[int, int] = (3, 3),
    pop_scale: float = 2.7,
    cell_size: float = 150.0,
    start_date: str = "2016-06-01",
    regimes: tuple[RegimeSpec, ...] = DEFAULT_REGIMES,
) -> SynthConfig:
    """Build a city of square neighborhoods on a 39x39-style lattice.

    Each 9x9-cell neighborhood holds four residential zones around a
    central utility zone that hosts the neighborhood antenna, so every
    cell's nearest antenna is its own neighborhood's. Blocks are separated
    by 5-cell streets, which keeps analyst-region buffers from leaking
    into other neighborhoods. Three neighborhoods double as daytime
    activity targets (business, leisure, event).

    pop_scale=2.7 calibrates the default penetration to roughly 50k
    operator users, matching a 30-55k daily density profile over the full
    grid.
    """
    block, street, margin = 9, 5, 1
    nb_r, nb_c = block_grid
    n_rows = 2 * margin + nb_r * block + (nb_r - 1) * street
    n_cols = 2 * margin + nb_c * block + (nb_c - 1) * street
    grid = GridSpec(PlanarPoint(0.0, 0.0), cell_size, n_rows, n_cols)

    rng = np.random.default_rng(seed)
    zones = []
    antennas = []
    hints = []
    util_rects = []
    for b in range(nb_r * nb_c):
        br, bc = divmod(b, nb_c)
        r0 = margin + br * (block + street)
        c0 = margin + bc * (block + street)

        def zone(suffix, rr0, rr1, cc0, cc1, lo, hi, land_use):
            pop = int(round(rng.integers(lo, hi + 1) * pop_scale))
            u11 = int(round(pop * rng.uniform(0.08, 0.13)))
            o80 = int(round(pop * rng.uniform(0.05, 0.09)))
            return ZoneLayout(
                f"N{b}-{suffix}", rr0, rr1, cc0, cc1, pop, u11, o80, land_use
            )

        top = zone("RA", r0, r0 + 3, c0, c0 + 9, 2600, 4400, "residential")
        bottom = zone("RB", r0 + 6, r0 + 9, c0, c0 + 9, 2600, 4400, "residential")
        left = zone("RC", r0 + 3, r0 + 6, c0, c0 + 3, 650, 1100, "residential")
        right = zone("RD", r0 + 3, r0 + 6, c0 + 6, c0 + 9, 650, 1100, "residential")
        util = zone("UT", r0 + 3, r0 + 6, c0 + 3, c0 + 6, 15, 60, "industrial")
        zones.extend([top, bottom, left, right, util])
        antennas.append((r0 + 4, c0 + 4))
        util_rects.append((r0 + 3, r0 + 6, c0 + 3, c0 + 6))
        hints.append((top.zone_id, bottom.zone_id, left.zone_id, right.zone_id))

    n_blocks = nb_r * nb_c
    business_b = n_blocks // 2
    leisure_b = n_blocks - 1
    event_b = 1 if n_blocks > 2 else 0
    activity_blocks = {
        "business": util_rects[business_b],
        "leisure": util_rects[leisure_b],
        "event": util_rects[event_b],
    }

    return SynthConfig(
        grid=grid,
        n_days=n_days,
        regimes=regimes,
        zones=tuple(zones),
        antennas=tuple(antennas),
        activity_blocks=activity_blocks,
        p=p,
        q=q,
        seed=seed,
        start_date=start_date,
        region_hints=tuple(hints),
    )
