import numpy as np
import pytest
from hypothesis import given

from strategies import traces
from tracelab.errors import EmptyInput, EmptyTrace
from tracelab.ingest import PollingPolicy, emulate_polling, reconstruct_from_polls
from tracelab.trace_model import AssociationRecord as R, build_timelines, sessions_by_node
from tracelab.user_metrics import (
    METRIC_NAMES,
    UserMetrics,
    ccdf,
    compute_user_metrics,
    location_prevalence,
    metric_ccdfs,
    prevalence_curve,
)


def rows_by_node(timelines):
    locations = frozenset().union(*(tl.locations for tl in timelines.values()))
    return {r.node: r for r in compute_user_metrics(sessions_by_node(timelines), locations)}


class TestUserMetrics:
    def test_t1_node_a(self, t1):
        a = rows_by_node(t1)["A"]
        assert (a.online_fraction, a.session_count, a.coverage, a.handoff_total, a.handoffs_per_session) == (
            0.75, 2, 1.0, 1, 0.5)

    def test_t1_node_b(self, t1):
        b = rows_by_node(t1)["B"]
        assert (b.session_count, b.online_fraction, b.coverage) == (1, 1.0, 0.5)

    def test_single_stay_against_two_location_universe(self):
        tl = build_timelines([R("A", "X", 0, 100)])
        (row,) = compute_user_metrics(sessions_by_node(tl), {"X", "Y"})
        assert (row.online_fraction, row.coverage, row.handoff_total) == (1.0, 0.5, 0)

    def test_empty(self):
        with pytest.raises(EmptyTrace):
            compute_user_metrics({}, {"X"})

    @given(traces(max_gap=300))
    def test_coverage_same_under_both_policies(self, records):
        polls = emulate_polling(records, 60)
        if not polls:
            return
        universe = {p.location for p in polls}
        cov = []
        for mult in (1, 4):
            tl = build_timelines(reconstruct_from_polls(polls, PollingPolicy(60, mult)))
            cov.append({r.node: r.coverage for r in compute_user_metrics(sessions_by_node(tl), universe)})
        assert cov[0] == cov[1]


class TestPrevalence:
    def test_t1_node_a(self, t1):
        curve = prevalence_curve({"A": t1["A"]}, 3)
        assert curve.ranks[0] == (1, pytest.approx(2 / 3, abs=1e-15))
        assert curve.ranks[1] == (2, pytest.approx(1 / 3, abs=1e-15))
        assert curve.ranks[2] == (3, 0.0)
        assert curve.node_counts == (1, 1, 0)

    def test_single_location_population(self):
        tl = build_timelines([R("A", "X", 0, 10), R("B", "X", 5, 50)])
        curve = prevalence_curve(tl, 4)
        assert [v for _, v in curve.ranks] == [1.0, 0.0, 0.0, 0.0]

    @given(traces())
    def test_fractions_sum_to_one_and_curve_non_increasing(self, records):
        tl = build_timelines(records)
        for t in tl.values():
            assert abs(sum(location_prevalence(t).values()) - 1) <= 1e-9
        values = [v for _, v in prevalence_curve(tl, 5).ranks]
        assert all(a >= b - 1e-15 for a, b in zip(values, values[1:]))


class TestCcdf:
    def test_repeated_values(self):
        assert ccdf([1, 1, 2]).points == ((1.0, pytest.approx(1 / 3)), (2.0, 0.0))

    def test_single(self):
        assert ccdf([5]).points == ((5.0, 0.0),)

    def test_counting(self):
        assert dict(ccdf([1, 2, 3, 4]).points)[2.0] == 0.5

    def test_empty(self):
        with pytest.raises(EmptyInput):
            ccdf([])

    @given(traces())
    def test_monotone(self, records):
        values = [r.end - r.start for r in records]
        table = ccdf(values)
        assert np.all(np.diff(table.prob) <= 0)
        assert table.prob[-1] == 0.0
        assert np.all(np.diff(table.x) > 0)

    def test_oracle(self):
        rng = np.random.default_rng(3)
        v = rng.integers(0, 20, size=200)
        for x, p in ccdf(v).points:
            assert p == np.mean(v > x)

    def test_metric_ccdfs(self, t1):
        tables = metric_ccdfs(list(rows_by_node(t1).values()))
        assert set(tables) == set(METRIC_NAMES)


def test_estimator(t1_records):
    est = UserMetrics(max_rank=2)
    X = est.fit_transform(t1_records)
    assert X.shape == (3, len(METRIC_NAMES))
    assert list(est.get_feature_names_out()) == list(METRIC_NAMES)
    assert X[0].tolist() == [0.75, 2, 1.0, 1, 0.5]
    assert est.get_params() == {"max_rank": 2}
