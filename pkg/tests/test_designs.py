import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kriging_reliability.designs import (
    Design,
    fill_distance,
    grid_design,
    halton_design,
    halton_points,
    quasi_uniformity_ratio,
    read_design_csv,
    separation_radius,
    uniform_random_design,
    volume_fill_lower_bound,
    write_design_csv,
)
from kriging_reliability.errors import DomainError, InputError, ShapeError


def radical_inverse(i: int, base: int) -> float:
    out, f = 0.0, 1.0 / base
    while i:
        out += (i % base) * f
        i //= base
        f /= base
    return out


class TestGrid:
    def test_small_grids(self):
        np.testing.assert_array_equal(grid_design(3).points[:, 0], [0, 0.5, 1])
        np.testing.assert_array_equal(grid_design(2).points[:, 0], [0, 1])
        corners = {tuple(p) for p in grid_design(4, 2).points}
        assert corners == {(0, 0), (0, 1), (1, 0), (1, 1)}

    def test_k_over_n_minus_one(self):
        n = 41
        np.testing.assert_allclose(grid_design(n).points[:, 0], np.arange(n) / (n - 1), rtol=0, atol=0)

    def test_shape_errors(self):
        with pytest.raises(ShapeError):
            grid_design(5, 2)
        with pytest.raises(ShapeError):
            grid_design(1)

    def test_interior_variant(self):
        d = grid_design(3, endpoints=False)
        np.testing.assert_allclose(d.points[:, 0], [0.25, 0.5, 0.75])
        assert not d.endpoints and d.levels == 3


class TestHalton:
    def test_base_two(self):
        np.testing.assert_allclose(halton_points(4, 1)[:, 0], [0.5, 0.25, 0.75, 0.125])

    def test_two_dimensional_start(self):
        np.testing.assert_allclose(halton_points(1, 2), [[0.5, 1 / 3]])

    def test_against_radical_inverse(self):
        pts = halton_points(200, 2)
        ref = np.array([[radical_inverse(i, 2), radical_inverse(i, 3)] for i in range(1, 201)])
        np.testing.assert_allclose(pts, ref, rtol=0, atol=1e-15)

    def test_distinct_open_interval(self):
        x = halton_points(500, 1)[:, 0]
        assert np.unique(x).size == 500
        assert x.min() > 0 and x.max() < 1
        assert halton_design(50, 2).kind == "halton"


class TestUniform:
    def test_deterministic(self):
        a = uniform_random_design(20, 2, seed=7)
        b = uniform_random_design(20, 2, seed=7)
        np.testing.assert_array_equal(a.points, b.points)
        assert a.seed == 7 and a.kind == "uniform"

    def test_mean(self):
        x = uniform_random_design(10_000, 1, seed=1).points
        assert 0.49 <= x.mean() <= 0.51

    def test_collision_resampled(self):
        class Forced:
            def __init__(self):
                self.calls = 0

            def random(self, size):
                self.calls += 1
                if self.calls == 1:
                    return np.full(size, 0.3)
                return np.full(size, 0.6)

        d = uniform_random_design(2, 1, rng=Forced())
        assert sorted(d.points[:, 0]) == [0.3, 0.6]


class TestDesignInvariants:
    def test_rejects_duplicates(self):
        with pytest.raises(InputError):
            Design([[0.1], [0.1]])

    def test_rejects_outside_cube(self):
        with pytest.raises(InputError):
            Design([[1.2]])
        with pytest.raises(InputError):
            Design([[np.nan]])

    def test_points_read_only(self):
        d = grid_design(3)
        with pytest.raises(ValueError):
            d.points[0, 0] = 0.3

    def test_csv_round_trip(self, tmp_path):
        d = halton_design(17, 2)
        write_design_csv(d, tmp_path / "d.csv")
        assert (tmp_path / "d.csv").read_text().splitlines()[0] == "x1,x2"
        np.testing.assert_array_equal(read_design_csv(tmp_path / "d.csv").points, d.points)

    def test_csv_header_checked(self, tmp_path):
        (tmp_path / "bad.csv").write_text("a,b\n0.1,0.2\n")
        with pytest.raises(InputError):
            read_design_csv(tmp_path / "bad.csv")


class TestGeometry:
    def test_fill_distance_examples(self):
        assert fill_distance(Design([0, 0.5, 1])) == 0.25
        assert fill_distance(Design([0.5])) == 0.5
        for n in (5, 40, 401):
            assert fill_distance(grid_design(n)) == pytest.approx(1 / (2 * (n - 1)), rel=1e-14)

    def test_separation_examples(self):
        assert separation_radius(Design([0, 0.5, 1])) == 0.25
        assert separation_radius(grid_design(11)) == pytest.approx(0.05)
        assert separation_radius(uniform_random_design(30, 2, seed=4)) > 0
        with pytest.raises(DomainError):
            separation_radius(Design([0.3]))

    def test_quasi_uniformity(self):
        assert quasi_uniformity_ratio(grid_design(21)) == pytest.approx(1.0)
        assert quasi_uniformity_ratio(Design([0, 0.1, 1])) == pytest.approx(9.0)
        ratios = [quasi_uniformity_ratio(grid_design(n)) for n in (10, 50, 250)]
        np.testing.assert_allclose(ratios, 1.0)

    def test_grid_fill_times_n(self):
        for n in range(10, 400, 37):
            h = fill_distance(grid_design(n))
            assert abs(h * n - 0.5) <= 1 / n

    def test_volume_lower_bound(self):
        designs = [grid_design(n) for n in (5, 20, 80)] + [grid_design(n, 2) for n in (9, 49)]
        designs += [uniform_random_design(30, d, seed=s) for s in range(5) for d in (1, 2)]
        for d in designs:
            h = fill_distance(d, resolution=200)
            assert h >= volume_fill_lower_bound(d.n, d.d) * (1 - 1e-12)

    def test_lattice_cross_check(self):
        # the lattice path is a lower bound within half a lattice step of the exact 1-d value
        for d in (uniform_random_design(15, 1, seed=2), grid_design(7)):
            exact = fill_distance(d)
            approx = fill_distance(d, resolution=2001, method="lattice")
            assert approx <= exact + 1e-15
            assert exact - approx <= 0.5 / 2000 + 1e-15

    def test_two_dimensional_grid(self):
        h = fill_distance(grid_design(9, 2), resolution=201)
        assert h == pytest.approx(math.sqrt(2) / 4, rel=1e-12)

    @given(st.lists(st.floats(0, 1), min_size=2, max_size=30, unique=True))
    @settings(max_examples=50, deadline=None)
    def test_fill_at_least_separation(self, xs):
        d = Design(xs)
        assert fill_distance(d) >= separation_radius(d) - 1e-15
