import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import G_UV, G_XY, make_sample
from lookuplat.errors import NoInformationError, ParseError
from lookuplat.estimate import Status
from lookuplat.grid import BinSpec, GridId, GridSpec, bin_rss, center_of, grid_of
from lookuplat.lookup import (
    CONTINUOUS,
    GRID,
    LookupTables,
    cell_listing,
    cluster_locations,
    construct_lookup_tables,
    dump_tables,
    load_tables,
    lookup_laterate,
    spread,
)
from lookuplat.scenario import LocatedSample, Measurement


def _dump(tables):
    buf = io.StringIO()
    dump_tables(tables, buf)
    return buf.getvalue()


def _grid_tables(cells, size=10.0, antennas=None):
    return LookupTables(GRID, BinSpec(1.0), {k: frozenset(v) for k, v in cells.items()},
                        grid_spec=GridSpec(size), antennas=antennas or {})


@st.composite
def surveys(draw, max_samples=40):
    """Random noisy-ish surveys: integer-grid positions, small antenna set."""
    n = draw(st.integers(1, max_samples))
    out = []
    for i in range(n):
        x = draw(st.floats(0, 200))
        y = draw(st.floats(0, 200))
        aids = draw(st.lists(st.integers(1, 6), min_size=1, max_size=6, unique=True))
        readings = {a: draw(st.floats(-120, -30)) for a in aids}
        out.append(LocatedSample(i, (x, y), Measurement(readings)))
    return out


class TestConstruction:
    def test_empty(self):
        t = construct_lookup_tables([], BinSpec(1.0), grid_spec=GridSpec(10.0))
        assert len(t) == 0

    def test_single_insertion(self):
        t = construct_lookup_tables([make_sample(0, (3.0, 4.0), a=-50.2)], BinSpec(1.0), grid_spec=GridSpec(10.0))
        assert t.cells == {("a", -51): frozenset({GridId(0, 0)})}

    def test_two_grid_cells(self, two_grid_samples, two_grid_spec, unit_bins):
        t = construct_lookup_tables(two_grid_samples, unit_bins, grid_spec=two_grid_spec)
        assert t.cells[("A", -61)] == {G_XY}
        assert t.cells[("A", -62)] == {G_UV}
        assert len(t.cells) == 10

    def test_grid_mode_needs_spec(self):
        with pytest.raises(ValueError):
            construct_lookup_tables([], BinSpec(1.0), GRID)

    def test_continuous_needs_diameter(self):
        with pytest.raises(ValueError):
            construct_lookup_tables([], BinSpec(1.0), CONTINUOUS)

    @settings(max_examples=60, deadline=None)
    @given(surveys(), st.randoms(use_true_random=False))
    def test_order_independent(self, samples, rnd):
        shuffled = list(samples)
        rnd.shuffle(shuffled)
        spec = GridSpec(25.0)
        a = construct_lookup_tables(samples, BinSpec(2.0), grid_spec=spec)
        b = construct_lookup_tables(shuffled, BinSpec(2.0), grid_spec=spec)
        assert _dump(a) == _dump(b)


class TestClustering:
    def test_merge(self):
        assert cluster_locations([(0, 0), (0.5, 0)], 2.0) == [(0.25, 0.0)]

    def test_apart(self):
        assert cluster_locations([(0, 0), (10, 0)], 2.0) == [(0.0, 0.0), (10.0, 0.0)]

    def test_three_points(self):
        pts = [(0.0, 0.0), (1.0, 0.0), (10.0, 0.0)]
        got = cluster_locations(pts, 2.0)
        assert got == [(0.5, 0.0), (10.0, 0.0)]
        # every assignment with clusters of diameter <= 2 must pair the first two
        feasible = []
        for labels in itertools.product(range(3), repeat=3):
            groups = {}
            for p, lab in zip(pts, labels):
                groups.setdefault(lab, []).append(p)
            if all(spread(np.array(g)) <= 2.0 for g in groups.values()):
                feasible.append(sorted(len(g) for g in groups.values()))
        assert min(len(f) for f in feasible) == len(got)

    def test_empty(self):
        assert cluster_locations([], 3.0) == []

    def test_bad_diameter(self):
        with pytest.raises(ValueError):
            cluster_locations([(0, 0)], 0.0)

    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.tuples(st.floats(0, 50), st.floats(0, 50)), min_size=1, max_size=60), st.floats(0.5, 20))
    def test_members_within_radius(self, pts, d):
        centers = np.array(cluster_locations(pts, d))
        p = np.array(pts)
        nearest = np.sqrt(((p[:, None, :] - centers[None]) ** 2).sum(axis=2)).min(axis=1)
        assert np.all(nearest <= d / 2 + 1e-9)


class TestQuery:
    @pytest.fixture
    def two_grid_tables(self, two_grid_samples, two_grid_spec, unit_bins):
        return construct_lookup_tables(two_grid_samples, unit_bins, grid_spec=two_grid_spec)

    def test_worked_example(self, two_grid_tables):
        est = lookup_laterate(Measurement({"A": -61.0}), two_grid_tables)
        assert est.position == (10.0, 10.0)
        assert est.status is Status.RESOLVED
        assert est.candidates == (G_XY,)

    def test_fallback_to_strongest_antenna(self, two_grid_tables):
        two_grid_tables.antennas.update({"A": (0.0, 0.0), "B": (50.0, 50.0)})
        est = lookup_laterate(Measurement({"A": -10.0, "B": -5.0}), two_grid_tables)
        assert est.status is Status.FALLBACK
        assert est.position == (50.0, 50.0)
        assert est.candidates_remaining == 0

    def test_fallback_unknown_antenna(self, two_grid_tables):
        with pytest.raises(NoInformationError):
            lookup_laterate(Measurement({"Z": -10.0}), two_grid_tables)

    def test_empty_query(self, two_grid_tables):
        with pytest.raises(NoInformationError):
            lookup_laterate(Measurement({}), two_grid_tables)

    def test_three_way_intersection(self):
        g, h, j = GridId(0, 0), GridId(3, 1), GridId(-2, 5)
        t = _grid_tables({(1, -50): {g, h}, (2, -60): {g, j}, (3, -70): {g}})
        est = lookup_laterate(Measurement({1: -49.5, 2: -59.5, 3: -69.5}), t)
        assert est.candidates == (g,)
        assert est.position == center_of(g, t.grid_spec)
        assert est.ops == 3

    def test_empty_intersection_keeps_previous(self):
        g, h, j = GridId(0, 0), GridId(1, 0), GridId(5, 5)
        t = _grid_tables({(1, -50): {g, h}, (2, -60): {j}, (3, -70): {g}})
        est = lookup_laterate(Measurement({1: -50.0, 2: -60.0, 3: -70.0}), t)
        assert set(est.candidates) == {g, h}
        assert est.status is Status.AMBIGUOUS
        assert est.position == (10.0, 5.0)

    def test_missing_cells_dropped(self):
        g, h = GridId(0, 0), GridId(1, 0)
        t = _grid_tables({(1, -50): {g, h}, (3, -70): {h}})
        est = lookup_laterate(Measurement({1: -50.0, 2: -55.0, 3: -70.0}), t)
        assert est.candidates == (h,)

    def test_spread_threshold_stops_early(self):
        g, h = GridId(0, 0), GridId(1, 0)
        t = _grid_tables({(1, -50): {g, h}, (2, -60): {g}})
        est = lookup_laterate(Measurement({1: -50.0, 2: -60.0}), t, spread_threshold=t.grid_spec.diagonal)
        assert set(est.candidates) == {g, h}
        assert est.status is Status.RESOLVED

    def test_continuous_mode(self):
        samples = [
            make_sample(0, (0.0, 0.0), a=-50.3, b=-70.0),
            make_sample(1, (0.4, 0.0), a=-50.2, b=-70.1),
            make_sample(2, (30.0, 0.0), a=-50.5, b=-60.0),
        ]
        t = construct_lookup_tables(samples, BinSpec(1.0), CONTINUOUS, cluster_diameter=2.0)
        assert t.cells[("a", -51)] == {(0.2, 0.0), (30.0, 0.0)}
        est = lookup_laterate(Measurement({"a": -50.1, "b": -70.0}), t)
        assert est.position == pytest.approx((0.2, 0.0))
        assert est.status is Status.RESOLVED


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(surveys(), st.sampled_from([5.0, 20.0, 50.0]), st.sampled_from([1.0, 3.0]))
    def test_grid_completeness_and_refinement(self, samples, size, s):
        spec = GridSpec(size)
        t = construct_lookup_tables(samples, BinSpec(s), grid_spec=spec)
        for smp in samples:
            est = lookup_laterate(smp.measurement, t)
            assert grid_of(smp.position, spec) in est.candidates
            assert est.ops <= len(smp.measurement)
            first = t.cells[(smp.measurement.strongest_first()[0][0],
                             bin_rss(smp.measurement.strongest_first()[0][1], t.bin_spec))]
            assert set(est.candidates) <= first

    @settings(max_examples=40, deadline=None)
    @given(surveys(max_samples=25), st.sampled_from([1.0, 4.0, 10.0]))
    def test_continuous_completeness(self, samples, d):
        t = construct_lookup_tables(samples, BinSpec(2.0), CONTINUOUS, cluster_diameter=d)
        for smp in samples:
            est = lookup_laterate(smp.measurement, t)
            c = np.array(est.candidates)
            assert np.min(np.hypot(*(c - smp.position).T)) <= d / 2 + 1e-9

    @settings(max_examples=60, deadline=None)
    @given(surveys())
    def test_unique_vectors_resolve_exactly(self, samples):
        spec, bins = GridSpec(20.0), BinSpec(1.0)
        t = construct_lookup_tables(samples, bins, grid_spec=spec)
        for smp in samples:
            keys = [(a, bin_rss(r, bins)) for a, r in smp.measurement.readings.items()]
            brute = set.intersection(*(set(t.cells[k]) for k in keys))
            est = lookup_laterate(smp.measurement, t)
            if len(brute) == 1:
                assert est.candidates == tuple(brute)
                assert est.status is Status.RESOLVED
            else:
                assert brute <= set(est.candidates)

    @settings(max_examples=30, deadline=None)
    @given(surveys(), st.lists(st.tuples(st.integers(1, 7), st.floats(-125, -25)), min_size=1, max_size=7))
    def test_deterministic(self, samples, query):
        t = construct_lookup_tables(samples, BinSpec(1.0), grid_spec=GridSpec(10.0),
                                    antennas={a: (float(a), 0.0) for a in range(1, 8)})
        m = Measurement(dict(query))
        assert lookup_laterate(m, t) == lookup_laterate(m, t)


class TestArtifact:
    def test_grid_round_trip(self, two_grid_samples, two_grid_spec, unit_bins):
        t = construct_lookup_tables(two_grid_samples, unit_bins, grid_spec=two_grid_spec, antennas={"A": (0.0, 0.0)})
        text = _dump(t)
        back = load_tables(io.StringIO(text))
        assert back == t
        assert _dump(back) == text

    def test_continuous_round_trip(self):
        samples = [LocatedSample(i, (0.1 * i, 3.3 * i), Measurement({7: -50.0 - i})) for i in range(20)]
        t = construct_lookup_tables(samples, BinSpec(2.0), CONTINUOUS, cluster_diameter=1.5)
        assert load_tables(io.StringIO(_dump(t))) == t

    def test_bad_header(self):
        with pytest.raises(ParseError):
            load_tables(io.StringIO("something else\n"))

    def test_listing(self, two_grid_samples, two_grid_spec, unit_bins):
        t = construct_lookup_tables(two_grid_samples, unit_bins, grid_spec=two_grid_spec)
        lines = cell_listing(t, {G_XY: "G_xy", G_UV: "G_uv"})
        assert "A,-61 -> G_xy" in lines
        assert "A,-62 -> G_uv" in lines
