import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lookuplat.grid import (
    BinSpec,
    GridId,
    GridSpec,
    bin_rss,
    cell_bounds,
    center_of,
    grid_of,
    grid_of_many,
)

coords = st.floats(min_value=-1e5, max_value=1e5, allow_nan=False)
sizes = st.floats(min_value=0.01, max_value=1000.0)


class TestSpecs:
    @pytest.mark.parametrize("size", [0.0, -1.0, math.nan, math.inf])
    def test_bad_cell_size(self, size):
        with pytest.raises(ValueError):
            GridSpec(size)

    @pytest.mark.parametrize("size", [0.0, -2.0, math.nan])
    def test_bad_bin_size(self, size):
        with pytest.raises(ValueError):
            BinSpec(size)

    def test_covering_uses_lower_left(self):
        spec = GridSpec.covering([(5.0, 9.0), (-3.0, 12.0), (7.0, 1.0)], 10.0)
        assert spec.origin == (-3.0, 1.0)

    def test_diagonal(self):
        assert GridSpec(20.0).diagonal == pytest.approx(28.2842712, abs=1e-6)

    def test_grid_id_str(self):
        assert str(GridId(3, -2)) == "3,-2"


class TestGridOf:
    @pytest.mark.parametrize(
        "p, size, expected",
        [
            ((12.3, 45.6), 10.0, (1, 4)),
            ((0.0, 0.0), 10.0, (0, 0)),
            ((19.999, 0.0), 20.0, (0, 0)),
            ((20.0, 0.0), 20.0, (1, 0)),
            ((-0.1, -10.0), 10.0, (-1, -1)),
        ],
    )
    def test_examples(self, p, size, expected):
        assert grid_of(p, GridSpec(size)) == GridId(*expected)

    @pytest.mark.parametrize("g, size, expected", [((1, 4), 10.0, (15.0, 45.0)), ((0, 0), 20.0, (10.0, 10.0))])
    def test_center_examples(self, g, size, expected):
        assert center_of(GridId(*g), GridSpec(size)) == expected

    def test_non_finite_point(self):
        with pytest.raises(ValueError):
            grid_of((math.nan, 0.0), GridSpec(1.0))

    @given(coords, coords, sizes, coords, coords)
    def test_point_inside_its_cell(self, x, y, size, ox, oy):
        spec = GridSpec(size, (ox, oy))
        g = grid_of((x, y), spec)
        x0, y0, x1, y1 = cell_bounds(g, spec)
        assert x0 <= x < x1 or math.isclose(x, x1)
        assert y0 <= y < y1 or math.isclose(y, y1)
        cx, cy = center_of(g, spec)
        assert math.hypot(x - cx, y - cy) <= size * math.sqrt(2) / 2 * (1 + 1e-9) + 1e-9

    @given(
        st.integers(-10_000, 10_000), st.integers(-10_000, 10_000),
        st.integers(-4096, 4096), st.integers(-4096, 4096),
        st.sampled_from([0.25, 0.5, 1.0, 2.0, 8.0]),
    )
    def test_translation_consistent(self, qx, qy, tx, ty, size):
        # dyadic coordinates keep the shift exact in floating point
        p = (qx / 64, qy / 64)
        shift = (tx / 8, ty / 8)
        a = grid_of(p, GridSpec(size))
        b = grid_of((p[0] + shift[0], p[1] + shift[1]), GridSpec(size, shift))
        assert a == b

    @given(st.lists(st.tuples(coords, coords), min_size=1, max_size=50), sizes)
    def test_vectorized_matches_scalar(self, pts, size):
        spec = GridSpec(size, (1.5, -2.25))
        many = grid_of_many(np.array(pts), spec)
        assert [tuple(r) for r in many.tolist()] == [tuple(grid_of(p, spec)) for p in pts]


class TestBins:
    @pytest.mark.parametrize("r, s, expected", [(-64.0, 1.0, -64), (-55.5, 1.0, -56), (-61.0, 5.0, -13), (-64.7, 1.0, -65)])
    def test_examples(self, r, s, expected):
        assert bin_rss(r, BinSpec(s)) == expected

    @pytest.mark.parametrize("r", [math.nan, math.inf, -math.inf])
    def test_non_finite(self, r):
        with pytest.raises(ValueError):
            bin_rss(r, BinSpec(1.0))

    @given(st.floats(-300, 50), st.floats(-300, 50), st.sampled_from([0.5, 1.0, 2.0, 3.0, 5.0, 10.0]))
    def test_monotone(self, a, b, s):
        lo, hi = sorted((a, b))
        assert bin_rss(lo, BinSpec(s)) <= bin_rss(hi, BinSpec(s))

    @given(st.integers(-400, 100), st.sampled_from([0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 0.1]))
    def test_boundary_idempotent(self, b, s):
        assert bin_rss(b * s, BinSpec(s)) == b
