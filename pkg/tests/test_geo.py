import math

import numpy as np
import pytest

from gridlink.errors import DegenerateGeometryError
from gridlink.geo import (
    EARTH_RADIUS_M,
    GeoPoint,
    GridSpec,
    PlanarPoint,
    Polygon,
    clip_to_rect,
    clipped_area,
    overlap_weights,
    polygon_area,
    project,
    rect_polygon,
    unproject,
)

from helpers import (
    haversine_m,
    mc_overlap_weights,
    mc_polygon_area,
    random_star_polygon,
)

ORIGIN = GeoPoint(lon=10.21, lat=45.54)


class TestProjection:
    def test_origin_maps_to_zero(self):
        p = project(ORIGIN, ORIGIN)
        assert p.x == 0.0 and p.y == 0.0

    def test_one_degree_latitude_arc(self):
        # closed form: R * pi / 180
        p = project(GeoPoint(lon=ORIGIN.lon, lat=ORIGIN.lat + 1.0), ORIGIN)
        assert p.x == 0.0
        assert p.y == pytest.approx(EARTH_RADIUS_M * math.pi / 180.0, abs=1e-6)
        assert p.y == pytest.approx(111194.92664455873, abs=1e-6)

    def test_round_trip(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            g = GeoPoint(
                lon=ORIGIN.lon + rng.uniform(-0.5, 0.5),
                lat=ORIGIN.lat + rng.uniform(-0.5, 0.5),
            )
            back = unproject(project(g, ORIGIN), ORIGIN)
            assert abs(back.lon - g.lon) < 1e-9
            assert abs(back.lat - g.lat) < 1e-9

    def test_small_scale_isometry_against_great_circle(self):
        # with a local origin serving the pair, projected distances stay
        # within 0.1% of great-circle distances for points <= 20 km apart
        # at latitude 45
        rng = np.random.default_rng(11)
        checked = 0
        for _ in range(200):
            a = GeoPoint(lon=10.2 + rng.uniform(-0.1, 0.1), lat=45.0 + rng.uniform(-0.08, 0.08))
            b = GeoPoint(lon=10.2 + rng.uniform(-0.1, 0.1), lat=45.0 + rng.uniform(-0.08, 0.08))
            gc = haversine_m(a.lon, a.lat, b.lon, b.lat)
            if gc > 20_000 or gc < 1.0:
                continue
            origin = GeoPoint(lon=(a.lon + b.lon) / 2, lat=(a.lat + b.lat) / 2)
            pa, pb = project(a, origin), project(b, origin)
            planar = math.hypot(pa.x - pb.x, pa.y - pb.y)
            assert abs(planar - gc) / gc < 1e-3
            checked += 1
        assert checked > 50

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            GeoPoint(lon=181.0, lat=0.0)
        with pytest.raises(ValueError):
            GeoPoint(lon=0.0, lat=-90.5)


class TestPolygonArea:
    def test_unit_square(self):
        assert polygon_area(rect_polygon(0, 0, 1, 1)) == pytest.approx(1.0)

    def test_orientation_invariance(self):
        sq = Polygon([(0, 0), (0, 1), (1, 1), (1, 0)])  # clockwise
        assert polygon_area(sq) == pytest.approx(1.0)

    def test_explicitly_closed_ring_normalized(self):
        sq = Polygon([(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)])
        assert len(sq.exterior) == 4
        assert polygon_area(sq) == pytest.approx(1.0)

    def test_hole_subtracted(self):
        outer = rect_polygon(0, 0, 4, 4).exterior
        inner = rect_polygon(1, 1, 2, 2).exterior
        poly = Polygon(outer, holes=[inner])
        assert polygon_area(poly) == pytest.approx(16.0 - 1.0)

    def test_degenerate_rejected(self):
        with pytest.raises(DegenerateGeometryError):
            Polygon([(0, 0), (1, 1)])
        with pytest.raises(DegenerateGeometryError):
            Polygon([(0, 0), (1, 1), (2, 2)])  # collinear, zero area

    def test_mutated_degenerate_detected_at_area(self):
        poly = rect_polygon(0, 0, 1, 1)
        poly.exterior[:] = 0.0  # arrays are mutable; op must re-check
        with pytest.raises(DegenerateGeometryError):
            polygon_area(poly)

    def test_hole_outside_rejected(self):
        with pytest.raises(DegenerateGeometryError):
            Polygon(
                rect_polygon(0, 0, 1, 1).exterior,
                holes=[rect_polygon(2, 2, 3, 3).exterior],
            )

    def test_random_polygon_matches_monte_carlo(self):
        rng = np.random.default_rng(23)
        for _ in range(3):
            ring = random_star_polygon(rng, n_vertices=11)
            poly = Polygon(ring)
            mc = mc_polygon_area(ring, (), 1_000_000, rng)
            assert abs(polygon_area(poly) - mc) / mc < 0.005


class TestClipToRect:
    def test_fully_inside_unchanged(self):
        poly = rect_polygon(0.2, 0.2, 0.8, 0.7)
        clipped = clip_to_rect(poly, (0, 0, 1, 1))
        assert clipped is not None
        assert abs(polygon_area(clipped) - polygon_area(poly)) < 1e-12

    def test_fully_outside_empty(self):
        poly = rect_polygon(2, 2, 3, 3)
        assert clip_to_rect(poly, (0, 0, 1, 1)) is None

    def test_half_square(self):
        poly = rect_polygon(0, 0, 1, 1)
        clipped = clip_to_rect(poly, (0.5, 0.0, 1.5, 1.0))
        assert polygon_area(clipped) == pytest.approx(0.5)

    def test_hole_handled(self):
        poly = Polygon(
            rect_polygon(0, 0, 4, 4).exterior,
            holes=[rect_polygon(1, 1, 3, 3).exterior],
        )
        # clip to left half: exterior 8, hole part 2 -> 6
        assert clipped_area(poly, (0, 0, 2, 4)) == pytest.approx(8.0 - 2.0)

    def test_concave_polygon_area_additive_over_cells(self):
        # clipping additivity: cell areas sum to the polygon area
        ring = [(0, 0), (4, 0), (4, 3), (2, 1), (0, 3)]
        poly = Polygon(ring)
        grid = GridSpec(PlanarPoint(0, 0), cell_size=1.0, n_rows=4, n_cols=5)
        total = sum(
            clipped_area(poly, grid.cell_rect(r, c))
            for r in range(grid.n_rows)
            for c in range(grid.n_cols)
        )
        assert total == pytest.approx(polygon_area(poly), rel=1e-9)


class TestOverlapWeights:
    def grid(self):
        return GridSpec(PlanarPoint(0, 0), cell_size=1.0, n_rows=4, n_cols=4)

    def test_zone_inside_one_cell(self):
        w = overlap_weights(rect_polygon(1.2, 1.2, 1.8, 1.9), self.grid(), "z")
        assert len(w.entries) == 1
        idx, weight = w.entries[0]
        assert idx == 1 * 4 + 1
        assert weight == pytest.approx(1.0, abs=1e-9)
        assert w.covered_fraction == pytest.approx(1.0, abs=1e-9)

    def test_square_on_four_cell_corner(self):
        w = overlap_weights(rect_polygon(1.5, 1.5, 2.5, 2.5), self.grid(), "z")
        assert len(w.entries) == 4
        for _, weight in w.entries:
            assert weight == pytest.approx(0.25, abs=1e-9)

    def test_conservation_for_interior_zone(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            ring = random_star_polygon(rng, center=(2.0, 2.0), r_min=0.3, r_max=1.2)
            w = overlap_weights(Polygon(ring), self.grid(), "z")
            assert abs(w.covered_fraction - 1.0) <= 1e-9
            assert abs(sum(x for _, x in w.entries) - 1.0) <= 1e-9

    def test_zone_partially_outside_grid(self):
        w = overlap_weights(rect_polygon(-1.0, 0.0, 1.0, 1.0), self.grid(), "z")
        assert w.covered_fraction == pytest.approx(0.5, abs=1e-9)

    def test_matches_monte_carlo_assignment(self):
        rng = np.random.default_rng(40)
        grid = self.grid()
        for _ in range(5):
            ring = random_star_polygon(rng, center=(2.0, 2.0), r_min=0.4, r_max=1.6)
            w = overlap_weights(Polygon(ring), grid, "z")
            oracle = mc_overlap_weights(ring, (), grid, 1_000_000, rng)
            keys = set(dict(w.entries)) | set(oracle)
            for k in keys:
                assert abs(dict(w.entries).get(k, 0.0) - oracle.get(k, 0.0)) < 1e-3

    def test_translation_equivariance(self):
        rng = np.random.default_rng(5)
        ring = random_star_polygon(rng, center=(2.0, 2.0))
        dx, dy = 12.25, -3.5
        w0 = overlap_weights(Polygon(ring), self.grid(), "z")
        grid2 = GridSpec(PlanarPoint(0 + dx, 0 + dy), 1.0, 4, 4)
        w1 = overlap_weights(Polygon(ring).translated(dx, dy), grid2, "z")
        assert len(w0.entries) == len(w1.entries)
        for (i0, a), (i1, b) in zip(w0.entries, w1.entries):
            assert i0 == i1
            assert abs(a - b) < 1e-12

    def test_weights_in_unit_interval(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            ring = random_star_polygon(rng, center=(2, 2), r_min=0.2, r_max=2.5)
            w = overlap_weights(Polygon(ring), self.grid(), "z")
            for _, weight in w.entries:
                assert 0.0 < weight <= 1.0


class TestGridSpec:
    def test_cell_rect_layout(self):
        g = GridSpec(PlanarPoint(10.0, 20.0), cell_size=2.0, n_rows=3, n_cols=5)
        assert g.cell_rect(0, 0) == (10.0, 20.0, 12.0, 22.0)
        assert g.cell_rect(2, 4) == (18.0, 24.0, 20.0, 26.0)
        assert g.flat_index(2, 4) == 14
        assert g.n_cells == 15

    def test_invalid_spec_rejected(self):
        with pytest.raises(ValueError):
            GridSpec(PlanarPoint(0, 0), cell_size=0.0, n_rows=1, n_cols=1)
        with pytest.raises(ValueError):
            GridSpec(PlanarPoint(0, 0), cell_size=1.0, n_rows=0, n_cols=1)

    def test_candidate_cells_clamped(self):
        g = GridSpec(PlanarPoint(0, 0), 1.0, 4, 4)
        rows, cols = g.candidate_cells((-10, -10, 0.5, 0.5))
        assert list(rows) == [0] and list(cols) == [0]
        rows, cols = g.candidate_cells((5, 5, 6, 6))
        assert list(rows) == [] or list(cols) == []
