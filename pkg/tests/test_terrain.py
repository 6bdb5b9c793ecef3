import math
from pathlib import Path

import numpy as np
import pytest

from terratour import (
    PlannerError,
    ingest_ascii_grid,
    random_grid,
    triangulate,
    height_at,
    height_at_many,
    ray_profile,
    tin_to_json,
    tin_from_json,
)
from conftest import make_tin, flat_tin, PAPER_CELL

DATA = Path(__file__).parent / "data"

TINY_GRID = """\
ncols 2
nrows 2
xllcorner 0.0
yllcorner 0.0
cellsize 10.0
1 2
3 4
"""


class TestIngest:
    def test_normalizes_to_min_zero(self):
        dem = ingest_ascii_grid(TINY_GRID)
        assert sorted(dem.heights.ravel().tolist()) == [0.0, 1.0, 2.0, 3.0]
        assert dem.heights.min() == 0.0
        assert dem.meta["original_min"] == 1.0
        # first file row is the northernmost -> highest internal row
        assert dem.heights[1].tolist() == [0.0, 1.0]
        assert dem.heights[0].tolist() == [2.0, 3.0]

    def test_header_keys_case_insensitive_any_order(self):
        text = "NROWS 2\nCELLSIZE 5\nXLLcorner 1\nYLLCORNER 2\nncols 2\n5 6\n7 8\n"
        dem = ingest_ascii_grid(text)
        assert dem.cellsize == 5.0
        assert dem.origin == (1.0, 2.0)

    def test_nodata_cell_rejected(self):
        text = TINY_GRID.replace("cellsize 10.0", "cellsize 10.0\nNODATA_value -9999")
        text = text.replace("3 4", "3 -9999")
        with pytest.raises(PlannerError) as exc:
            ingest_ascii_grid(text)
        assert exc.value.code == "nodata-present"

    def test_missing_header_key(self):
        with pytest.raises(PlannerError) as exc:
            ingest_ascii_grid("ncols 2\nnrows 2\n1 2\n3 4\n")
        assert exc.value.code == "malformed-header"

    def test_value_count_mismatch(self):
        with pytest.raises(PlannerError) as exc:
            ingest_ascii_grid(TINY_GRID + "99\n")
        assert exc.value.code == "count-mismatch"

    def test_non_finite_rejected(self):
        with pytest.raises(PlannerError) as exc:
            ingest_ascii_grid(TINY_GRID.replace("3 4", "3 nan"))
        assert exc.value.code == "non-finite"

    def test_real_dem_token_count_oracle(self):
        # independent oracle: count whitespace tokens in the data block
        text = DATA.joinpath("ridge_valley.asc").read_text()
        body_tokens = 0
        nrows = ncols = None
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            if parts[0].lower() == "nrows":
                nrows = int(parts[1])
            elif parts[0].lower() == "ncols":
                ncols = int(parts[1])
            elif not parts[0][0].isalpha():
                body_tokens += len(parts)
        assert body_tokens == nrows * ncols

        dem = ingest_ascii_grid(text)
        assert dem.heights.size == body_tokens
        assert dem.heights.min() == 0.0


class TestRandomGrid:
    def test_same_seed_bitwise_identical(self):
        a = random_grid(42, 10, 10, PAPER_CELL, 0.0, 100.0)
        b = random_grid(42, 10, 10, PAPER_CELL, 0.0, 100.0)
        assert a.heights.tobytes() == b.heights.tobytes()

    def test_heights_within_range(self):
        dem = random_grid(7, 10, 10, PAPER_CELL, 0.0, 100.0)
        assert dem.heights.min() >= 0.0
        assert dem.heights.max() <= 100.0

    def test_degenerate_interval(self):
        dem = random_grid(3, 4, 4, 1.0, 5.0, 5.0)
        assert (dem.heights == 5.0).all()

    def test_invalid_bounds(self):
        with pytest.raises(PlannerError) as exc:
            random_grid(1, 4, 4, 1.0, 5.0, 4.0)
        assert exc.value.code == "invalid-bounds"


class TestTriangulate:
    def test_single_cell_two_triangles(self):
        tin = triangulate(ingest_ascii_grid(TINY_GRID))
        assert len(tin.triangles) == 2

    def test_ten_by_ten_triangle_count(self):
        tin = make_tin(1)
        assert len(tin.triangles) == 2 * 9 * 9

    def test_projected_area_tiles_bounds(self):
        tin = make_tin(5)
        v = tin.vertices
        a, b, c = (v[tin.triangles[:, k]] for k in range(3))
        areas = 0.5 * np.abs(
            (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
            - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])
        )
        expect = 9 * 9 * PAPER_CELL**2
        assert abs(areas.sum() - expect) <= 1e-9 * expect
        assert (areas > 0).all()

    def test_normalized_and_lmax(self):
        tin = make_tin(9, hmin=20.0, hmax=60.0)
        assert tin.vertices[:, 2].min() == 0.0
        assert tin.lmax == tin.vertices[:, 2].max()
        assert tin.lmax <= 40.0

    def test_json_round_trip(self):
        tin = make_tin(11)
        doc = tin_to_json(tin)
        back = tin_from_json(doc)
        assert np.array_equal(back.vertices, tin.vertices)
        assert np.array_equal(back.triangles, tin.triangles)
        assert back.bounds == tin.bounds
        assert back.lmax == tin.lmax
        assert back.grid is not None


def plane_height_oracle(tin, x, y):
    """Independent check: locate triangle by sign tests, evaluate its plane."""
    v = tin.vertices
    for i0, i1, i2 in tin.triangles:
        a, b, c = v[i0], v[i1], v[i2]
        d1 = (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0])
        d2 = (c[0] - b[0]) * (y - b[1]) - (c[1] - b[1]) * (x - b[0])
        d3 = (a[0] - c[0]) * (y - c[1]) - (a[1] - c[1]) * (x - c[0])
        if d1 >= -1e-9 and d2 >= -1e-9 and d3 >= -1e-9:
            n = np.cross(b - a, c - a)
            return a[2] - (n[0] * (x - a[0]) + n[1] * (y - a[1])) / n[2]
    raise AssertionError("no containing triangle")


class TestHeightAt:
    def test_exact_at_grid_vertices(self, rough_tin):
        for vx, vy, vz in rough_tin.vertices[::7]:
            assert height_at(rough_tin, vx, vy) == vz

    def test_edge_midpoint_is_mean(self, rough_tin):
        v = rough_tin.vertices
        i0, i1, _ = rough_tin.triangles[40]
        mid = 0.5 * (v[i0] + v[i1])
        assert height_at(rough_tin, mid[0], mid[1]) == pytest.approx(
            0.5 * (v[i0][2] + v[i1][2]), abs=1e-9
        )

    def test_matches_plane_equation_oracle(self, rough_tin, rng):
        xmin, ymin, xmax, ymax = rough_tin.bounds
        xs = rng.uniform(xmin, xmax, 1000)
        ys = rng.uniform(ymin, ymax, 1000)
        got = height_at_many(rough_tin, xs, ys)
        scale = rough_tin.lmax
        for x, y, z in zip(xs, ys, got):
            assert abs(z - plane_height_oracle(rough_tin, x, y)) <= 1e-9 * scale

    def test_generic_locator_agrees_with_grid_path(self, rough_tin, rng):
        doc = tin_to_json(rough_tin)
        del doc["grid"]
        generic = tin_from_json(doc)
        assert generic.grid is None
        xmin, ymin, xmax, ymax = rough_tin.bounds
        xs = rng.uniform(xmin, xmax, 300)
        ys = rng.uniform(ymin, ymax, 300)
        np.testing.assert_allclose(
            height_at_many(generic, xs, ys),
            height_at_many(rough_tin, xs, ys),
            atol=1e-9,
        )

    def test_out_of_bounds_rejected(self, rough_tin):
        with pytest.raises(PlannerError) as exc:
            height_at(rough_tin, -50.0, 10.0)
        assert exc.value.code == "out-of-bounds"


class TestRayProfile:
    def test_flat_terrain_constant_profile(self):
        tin = flat_tin(7.5)
        prof = ray_profile(tin, (30.0, 40.0), 0.7)
        assert all(bp.z == 0.0 for bp in prof)  # normalized flat surface sits at 0

    def test_axis_aligned_ray_crosses_at_cell_multiples(self, rough_tin):
        v0 = rough_tin.vertices[11]  # interior grid vertex
        prof = ray_profile(rough_tin, (v0[0], v0[1]), 0.0)
        ts = {round(bp.t, 6) for bp in prof}
        expect = {round(k * PAPER_CELL, 6) for k in range(1, 4)}
        assert expect <= ts

    def test_breakpoints_match_height_at(self, rough_tin, rng):
        for _ in range(25):
            x0 = rng.uniform(10, 190)
            y0 = rng.uniform(10, 190)
            az = rng.uniform(0, 2 * math.pi)
            prof = ray_profile(rough_tin, (x0, y0), az)
            for bp in prof:
                x = x0 + bp.t * math.cos(az)
                y = y0 + bp.t * math.sin(az)
                assert bp.z == pytest.approx(height_at(rough_tin, x, y), abs=1e-9)

    def test_linear_between_breakpoints(self, rough_tin, rng):
        for _ in range(25):
            x0 = rng.uniform(10, 190)
            y0 = rng.uniform(10, 190)
            az = rng.uniform(0, 2 * math.pi)
            prof = ray_profile(rough_tin, (x0, y0), az)
            for lo, hi in zip(prof, prof[1:]):
                lam = rng.uniform(0.05, 0.95)
                t = lo.t + lam * (hi.t - lo.t)
                interp = lo.z + lam * (hi.z - lo.z)
                x = x0 + t * math.cos(az)
                y = y0 + t * math.sin(az)
                assert abs(interp - height_at(rough_tin, x, y)) <= 1e-9 * max(
                    1.0, rough_tin.lmax
                )

    def test_strictly_increasing_and_continuous(self, rough_tin):
        prof = ray_profile(rough_tin, (55.0, 87.0), 2.1)
        ts = [bp.t for bp in prof]
        assert all(b > a for a, b in zip(ts, ts[1:]))
        for lo, hi in zip(prof, prof[1:]):
            assert abs(lo.z + lo.slope * (hi.t - lo.t) - hi.z) <= 1e-9 * max(
                1.0, rough_tin.lmax
            )
