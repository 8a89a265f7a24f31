import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hs

from flipchain import statistics as st
from flipchain.dynamics import NODE_THEN_LINK, UNIFORM_LINK, ChainState, run
from flipchain.triangulation import (flip, make_christmas_tree, make_tetrahedron,
                                     opposite_vertices)

from conftest import random_walk


def test_histogram_examples():
    assert st.degree_histogram(make_tetrahedron()).as_dict() == {3: 4}
    c = st.cumulative(st.degree_histogram(make_tetrahedron()))
    assert list(c.degrees) == [3] and list(c.values) == [4]
    h = st.degree_histogram(make_christmas_tree(7))
    assert h.as_dict() == {3: 2, 4: 3, 6: 2}
    c = st.cumulative(h)
    assert list(c.degrees) == [3, 4, 5, 6]
    assert list(c.values) == [7, 5, 2, 2]


@settings(max_examples=20, deadline=None)
@given(hs.integers(5, 60), hs.integers(0, 10**6))
def test_histogram_conservation(n, seed):
    T = random_walk(make_christmas_tree(n), 4 * n, seed)
    h = st.degree_histogram(T)
    d = np.arange(len(h.counts))
    assert h.counts.sum() == n
    assert (d * h.counts).sum() == 6 * n - 12
    c = st.cumulative(h)
    assert c.values[0] == n
    assert np.all(np.diff(c.values) <= 0)


def test_merge_equals_concatenated_sample():
    T = make_christmas_tree(40)
    per_chain = []
    joint = st.DegreeSampler(40, 400)
    for seed in (1, 2):
        s = st.DegreeSampler(40, 400)
        run(ChainState(T.copy(), NODE_THEN_LINK, seed=seed), 8000, [s])
        per_chain.append(s.hist)
        # one sampler fed both chains in turn sees the concatenated sample
        run(ChainState(T.copy(), NODE_THEN_LINK, seed=seed), 8000, [joint])
    merged = per_chain[0].merge(per_chain[1])
    assert merged.samples == joint.hist.samples == 40
    assert np.array_equal(np.trim_zeros(merged.counts, "b"), np.trim_zeros(joint.hist.counts, "b"))
    assert np.isclose(merged.mean.sum(), 40)


def test_merge_rejects_mismatched_n():
    with pytest.raises(ValueError):
        st.degree_histogram(make_christmas_tree(5)).merge(st.degree_histogram(make_christmas_tree(6)))


# fits

def _synthetic(values):
    degrees = np.arange(3, 3 + len(values))
    return st.CumulativeDistribution(degrees, np.asarray(values, dtype=float))


def test_fit_power_law_exact():
    i = np.arange(3, 40)
    c = _synthetic(5000.0 * i ** -3.0)
    f = st.fit_loglog(c, window=(6, 30))
    assert abs(f.slope + 3) < 1e-9
    assert f.residual < 1e-18
    assert f.points == 25


def test_fit_exponential_exact():
    i = np.arange(3, 40)
    c = _synthetic(800.0 * np.exp(-0.4 * i))
    f = st.fit_loglinear(c, window=(6, 30))
    assert abs(f.slope + 0.4) < 1e-9
    g = st.fit_loglog(c, window=(6, 30))
    assert g.residual > f.residual


def test_fit_too_few_points():
    c = _synthetic(100.0 * np.arange(3, 20) ** -3.0)
    with pytest.raises(st.FitError):
        st.fit_loglog(c, window=(6, 7))
    with pytest.raises(st.FitError):
        st.fit_loglinear(c, window=(9, 6))


def test_default_window():
    assert st.default_window(8194) == (6, 25)
    assert st.default_window(1000) == (6, 14)


def test_log_binned():
    h = st.degree_histogram(make_christmas_tree(30))
    edges, centers, density = st.log_binned(h)
    assert edges[0] == 3 and edges[-1] > h.max_degree
    widths = np.diff(edges)
    assert np.isclose((density * widths).sum(), 30)


# curvature

def test_curvature_examples():
    assert st.forman_curvature_sum(make_tetrahedron()) == -24
    assert st.forman_curvature_sum(make_christmas_tree(7)) == -12
    assert st.forman_curvature_tracked(make_christmas_tree(7)) == -12


def test_curvature_flip_delta(tree7):
    a, b = 1, 4
    c, d = opposite_vertices(tree7, tree7.link(a, b))
    before = st.forman_curvature_sum(tree7)
    da, db, dc, dd = (tree7.degree(v) for v in (a, b, c, d))
    flip(tree7, tree7.link(a, b))
    assert st.forman_curvature_sum(tree7) - before == 2 * (dc + dd - da - db + 2)


@pytest.mark.parametrize("rule", [UNIFORM_LINK, NODE_THEN_LINK])
def test_curvature_incremental_matches_recompute(rule):
    chain = ChainState(make_christmas_tree(300), rule, seed=8)
    for _ in range(10):
        run(chain, 10**4)
        assert st.forman_curvature_tracked(chain.T) == st.forman_curvature_sum(chain.T)


# neighbour degrees

def test_neighbor_stats_tetrahedron():
    s = st.neighbor_degree_stats(make_tetrahedron())
    assert s.joint == {(3, 3): 12}
    assert s.degenerate


def test_neighbor_stats_tree7(tree7):
    s = st.neighbor_degree_stats(tree7)
    expect = {}
    for a, b in tree7.link_set():
        for x, y in ((a, b), (b, a)):
            key = (tree7.degree(x), tree7.degree(y))
            expect[key] = expect.get(key, 0) + 1
    assert s.joint == expect
    assert sum(s.joint.values()) == 2 * 15
    assert not s.degenerate and -1 <= s.correlation <= 1
    h = st.degree_histogram(tree7)
    assert s.marginal() == {d: d * k for d, k in h.as_dict().items()}


# observers

def test_rejection_tracker_tetrahedron():
    chain = ChainState(make_tetrahedron(), NODE_THEN_LINK)
    tr = st.rejection_tracker(100)
    run(chain, 1000, [tr])
    assert tr.series.rejection_rate == [1.0] * 10
    assert sum(tr.window_attempts) == chain.attempts


def test_rejection_tracker_accounting():
    chain = ChainState(make_christmas_tree(100), NODE_THEN_LINK, seed=5)
    tr = st.RejectionTracker(997)
    run(chain, 50 * 997, [tr])
    assert sum(tr.window_attempts) == chain.attempts
    assert sum(tr.window_rejected) == chain.rejected
    assert all(np.diff(tr.series.attempts) > 0)
    with pytest.raises(ValueError):
        st.RejectionTracker(0)


def test_time_series_monotone_attempts():
    ts = st.TimeSeries()
    ts.append(10, 0, 0.5, 6)
    with pytest.raises(ValueError):
        ts.append(10, 0, 0.5, 6)


# CSV

def test_csv_writers(tmp_path):
    T = make_christmas_tree(7)
    st.write_histogram_csv(tmp_path / "h.csv", st.degree_histogram(T))
    rows = list(csv.reader(open(tmp_path / "h.csv")))
    assert rows[0] == ["degree", "count", "cumulative_ge"]
    assert rows[1:] == [["3", "2", "7"], ["4", "3", "5"], ["5", "0", "2"], ["6", "2", "2"]]

    ts = st.TimeSeries()
    ts.append(5, -12, 1 / 3, 6)
    st.write_timeseries_csv(tmp_path / "t.csv", ts)
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows == [["attempts", "curvature", "rejection_rate", "max_degree"],
                    ["5", "-12", repr(1 / 3), "6"]]
    assert float(rows[1][2]) == 1 / 3

    f = st.fit_loglog(_synthetic(100.0 * np.arange(3, 20) ** -3.0), window=(6, 12))
    st.write_fits_csv(tmp_path / "f.csv", [f])
    rows = list(csv.reader(open(tmp_path / "f.csv")))
    assert rows[0] == ["model", "d_lo", "d_hi", "slope", "intercept", "residual"]
    assert float(rows[1][3]) == f.slope
