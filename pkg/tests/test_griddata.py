import gzip

import numpy as np
import pytest

from gridlink.errors import (
    BoundsError,
    ConfigError,
    EmptyInputError,
    ParseError,
    SchemaError,
)
from gridlink.geo import GridSpec, PlanarPoint
from gridlink.griddata import (
    CellRegion,
    DayRecord,
    GridSeries,
    SynthConfig,
    compute_ddp,
    connectivity_curve,
    load_series,
    standardize,
    synth_generate,
    synthetic_city_config,
    write_series_csv,
)

GRID2 = GridSpec(PlanarPoint(0, 0), 150.0, 2, 2)


def make_csv(tmp_path, rows, name="grid.csv"):
    path = tmp_path / name
    lines = ["date,quarter,row,col,value"] + rows
    path.write_text("\n".join(lines) + "\n")
    return path


def full_day_rows(day, value=1.0, grid=GRID2, skip_quarters=()):
    rows = []
    for q in range(96):
        if q in skip_quarters:
            continue
        for r in range(grid.n_rows):
            for c in range(grid.n_cols):
                rows.append(f"{day},{q},{r},{c},{value}")
    return rows


class TestLoadSeries:
    def test_two_well_formed_days(self, tmp_path):
        rows = full_day_rows("2016-06-01") + full_day_rows("2016-06-02", value=2.5)
        series, dropped = load_series(make_csv(tmp_path, rows), GRID2)
        assert dropped == 0
        assert series.day_ids == ["2016-06-01", "2016-06-02"]
        assert series.days[0].values.shape == (96, 2, 2)
        assert series.days[1].values[0, 0, 0] == 2.5

    def test_missing_quarter_drops_day(self, tmp_path):
        rows = full_day_rows("2016-06-01") + full_day_rows(
            "2016-06-02", skip_quarters=(42,)
        )
        series, dropped = load_series(make_csv(tmp_path, rows), GRID2)
        assert dropped == 1
        assert series.day_ids == ["2016-06-01"]

    def test_negative_value_names_line(self, tmp_path):
        rows = ["2016-06-01,0,0,0,5", "2016-06-01,0,0,1,-3"]
        with pytest.raises(ParseError) as exc:
            load_series(make_csv(tmp_path, rows), GRID2)
        assert exc.value.line == 3

    def test_malformed_row_names_line(self, tmp_path):
        rows = ["2016-06-01,0,0,0,5", "2016-06-01,0,0"]
        with pytest.raises(ParseError) as exc:
            load_series(make_csv(tmp_path, rows), GRID2)
        assert exc.value.line == 3

    def test_non_numeric_value(self, tmp_path):
        with pytest.raises(ParseError):
            load_series(make_csv(tmp_path, ["2016-06-01,0,0,0,abc"]), GRID2)

    def test_dimension_mismatch_is_schema_error(self, tmp_path):
        with pytest.raises(SchemaError):
            load_series(make_csv(tmp_path, ["2016-06-01,0,5,0,1"]), GRID2)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c,d,e\n")
        with pytest.raises(SchemaError):
            load_series(path, GRID2)

    def test_sparse_cells_default_to_zero(self, tmp_path):
        rows = [f"2016-06-01,{q},0,0,{q + 1}" for q in range(96)]
        series, _ = load_series(make_csv(tmp_path, rows), GRID2)
        assert series.days[0].values[10, 0, 0] == 11
        assert series.days[0].values[10, 1, 1] == 0

    def test_gzip_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        values = np.round(rng.uniform(0, 9, (96, 2, 2)))
        series = GridSeries(GRID2, [DayRecord("2016-06-01", values)])
        path = tmp_path / "grid.csv.gz"
        write_series_csv(series, path)
        with gzip.open(path, "rt") as fh:
            assert fh.readline().strip() == "date,quarter,row,col,value"
        loaded, dropped = load_series(path, GRID2)
        assert dropped == 0
        assert np.array_equal(loaded.days[0].values, values)

    def test_write_is_deterministic(self, tmp_path):
        values = np.ones((96, 2, 2))
        series = GridSeries(GRID2, [DayRecord("2016-06-01", values)])
        p1, p2 = tmp_path / "a.csv.gz", tmp_path / "b.csv.gz"
        write_series_csv(series, p1)
        write_series_csv(series, p2)
        assert p1.read_bytes() == p2.read_bytes()


def series_from_arrays(*day_arrays, grid=GRID2):
    days = [
        DayRecord(f"2016-06-{i + 1:02d}", np.asarray(a, dtype=float))
        for i, a in enumerate(day_arrays)
    ]
    return GridSeries(grid, days)


class TestStandardize:
    def test_affine_map(self):
        values = np.zeros((96, 2, 2))
        values[0, 0, 0] = 200.0
        values[1, 0, 1] = 50.0
        z = standardize(series_from_arrays(values))
        assert z.days[0].values[1, 0, 1] == pytest.approx(25.0)
        assert z.days[0].values[0, 0, 0] == pytest.approx(100.0)

    def test_constant_series_maps_to_zero(self):
        z = standardize(series_from_arrays(np.full((96, 2, 2), 7.0)))
        assert np.all(z.days[0].values == 0.0)

    def test_range_is_zero_to_hundred(self):
        rng = np.random.default_rng(1)
        z = standardize(series_from_arrays(rng.uniform(3, 9, (96, 2, 2))))
        allv = z.days[0].values
        assert allv.min() == pytest.approx(0.0)
        assert allv.max() == pytest.approx(100.0)

    def test_global_scope_spans_days(self):
        a = np.zeros((96, 2, 2))
        b = np.full((96, 2, 2), 10.0)
        z = standardize(series_from_arrays(a, b))
        assert np.all(z.days[0].values == 0.0)
        assert np.all(z.days[1].values == 100.0)

    def test_monotone(self):
        rng = np.random.default_rng(2)
        x1 = rng.uniform(0, 5, (96, 2, 2))
        x2 = x1 + rng.uniform(0, 3, (96, 2, 2))
        z = standardize(series_from_arrays(x1, x2))
        # same affine map applies to both days: pointwise order preserved
        assert np.all(z.days[0].values <= z.days[1].values + 1e-12)

    def test_rescale_back_round_trip(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(2, 11, (96, 2, 2))
        z = standardize(series_from_arrays(x))
        restored = z.vmin + z.days[0].values * (z.vmax - z.vmin) / 100.0
        z2 = standardize(series_from_arrays(restored))
        assert np.allclose(z.days[0].values, z2.days[0].values, atol=1e-9)

    def test_per_frame_mode(self):
        rng = np.random.default_rng(4)
        x = rng.uniform(0, 1, (96, 2, 2)) + np.arange(96)[:, None, None]
        z = standardize(series_from_arrays(x), mode="per_frame")
        for q in range(96):
            assert z.days[0].values[q].min() == pytest.approx(0.0)
            assert z.days[0].values[q].max() == pytest.approx(100.0)

    def test_empty_series_rejected(self):
        with pytest.raises(EmptyInputError):
            standardize(GridSeries(GRID2, []))


class TestComputeDdp:
    def test_single_cell_region(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(0, 9, (96, 2, 2))
        curves = compute_ddp(series_from_arrays(x), CellRegion(1, 2, 0, 1))
        assert np.allclose(curves[0].values, x[:, 1, 0])

    def test_additivity_over_disjoint_halves(self):
        # integer-valued counts: float sums are exact, so additivity is too
        rng = np.random.default_rng(6)
        x = rng.integers(0, 500, (96, 2, 2)).astype(float)
        series = series_from_arrays(x)
        whole = compute_ddp(series, CellRegion(0, 2, 0, 2))[0].values
        left = compute_ddp(series, CellRegion(0, 2, 0, 1))[0].values
        right = compute_ddp(series, CellRegion(0, 2, 1, 2))[0].values
        assert np.array_equal(left + right, whole)

    def test_out_of_bounds_region(self):
        with pytest.raises(BoundsError):
            compute_ddp(series_from_arrays(np.zeros((96, 2, 2))), CellRegion(0, 3, 0, 2))

    def test_default_region_is_whole_grid(self):
        x = np.ones((96, 2, 2))
        curves = compute_ddp(series_from_arrays(x))
        assert np.all(curves[0].values == 4.0)


class TestConnectivity:
    def test_full_during_evening_snapshot(self):
        alpha = connectivity_curve(0.62)
        assert alpha[84] == 1.0  # 21:00
        assert alpha[48] == 1.0  # 12:00
        assert alpha.min() == pytest.approx(0.62)
        assert np.all((alpha >= 0.62) & (alpha <= 1.0))


def tiny_city(seed=0, n_days=1, q=0.0, pop_scale=1.0):
    return synthetic_city_config(
        seed=seed, n_days=n_days, q=q, block_grid=(2, 2), pop_scale=pop_scale
    )


class TestSynthGenerate:
    def test_deterministic_in_seed(self):
        cfg = tiny_city(seed=42, n_days=2)
        a = synth_generate(cfg)
        b = synth_generate(cfg)
        assert a.ground_truth == b.ground_truth
        for da, db in zip(a.series.days, b.series.days):
            assert np.array_equal(da.values, db.values)

    def test_no_displacement_keeps_mass_in_zone(self):
        cfg = tiny_city(seed=1, q=0.0)
        res = synth_generate(cfg)
        frame = res.series.days[0].values[84]  # 21:00, connectivity 1.0
        for z, truth in zip(cfg.zones, res.ground_truth["zones"]):
            mass = frame[z.row0 : z.row1, z.col0 : z.col1].sum()
            users = truth["users"]
            # binomial draw plus poisson noise
            assert abs(mass - users) <= 4 * np.sqrt(users) + 1
            assert abs(users - cfg.p * z.filtered) <= 4 * np.sqrt(
                z.filtered * cfg.p * (1 - cfg.p)
            )

    def test_full_displacement_moves_all_mass_to_antennas(self):
        cfg = tiny_city(seed=2, q=1.0)
        res = synth_generate(cfg)
        frame = res.series.days[0].values[84]
        antenna_mask = np.zeros(frame.shape, dtype=bool)
        for r, c in cfg.antennas:
            antenna_mask[r, c] = True
        assert frame[~antenna_mask].sum() == 0.0
        assert frame[antenna_mask].sum() > 0

    def test_expected_mass_conserved_over_seeds(self):
        totals = []
        expected = []
        for seed in range(10):
            cfg = tiny_city(seed=seed)
            res = synth_generate(cfg)
            totals.append(res.series.days[0].values[84].sum())
            filtered = sum(z["filtered"] for z in res.ground_truth["zones"])
            expected.append(cfg.p * filtered)
        mean_total = np.mean(totals)
        mean_expected = np.mean(expected)
        sd_binomial = np.sqrt(np.mean(expected) * (1 - 0.30))
        assert abs(mean_total - mean_expected) <= 3 * sd_binomial

    def test_figure_scale_ddp_bounds(self):
        cfg = synthetic_city_config(seed=11, n_days=2, q=0.0)
        res = synth_generate(cfg)
        for curve in compute_ddp(res.series):
            assert np.all(curve.values >= 30_000)
            assert np.all(curve.values <= 55_000)

    def test_zone_outside_grid_rejected(self):
        cfg = tiny_city()
        bad_zone = cfg.zones[0].__class__(
            "bad", 0, 99, 0, 2, 100, 5, 5, "residential"
        )
        with pytest.raises(ConfigError):
            SynthConfig(
                grid=cfg.grid,
                n_days=1,
                regimes=cfg.regimes,
                zones=(bad_zone,),
                antennas=cfg.antennas,
                activity_blocks=cfg.activity_blocks,
                p=0.3,
                q=0.0,
                seed=0,
            )

    def test_invalid_p_q_rejected(self):
        cfg = tiny_city()
        for p, q in [(0.0, 0.0), (1.0, 0.0), (0.3, -0.1), (0.3, 1.5)]:
            with pytest.raises(ConfigError):
                SynthConfig(
                    grid=cfg.grid,
                    n_days=1,
                    regimes=cfg.regimes,
                    zones=cfg.zones,
                    antennas=cfg.antennas,
                    activity_blocks=cfg.activity_blocks,
                    p=p,
                    q=q,
                    seed=0,
                )

    def test_regimes_all_home_at_evening_snapshot(self):
        # every regime's away profile is zero at 21:00
        cfg = tiny_city()
        for regime in cfg.regimes:
            for w in regime.away_windows:
                assert w.profile()[84] == 0.0
