import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from strategies import traces
from tracelab.encounters import FriendshipRow, aggregate_pairs, extract_encounters
from tracelab.ergraph import (
    ERGraph,
    GraphMetrics,
    SmallWorldAnalyzer,
    _from_edges,
    average_path_length,
    build_er_graph,
    build_friend_graph,
    clustering_coefficient,
    disconnected_ratio,
    evolve_metrics,
    make_reference,
    normalize,
    reference_degree,
    small_world,
)
from tracelab.errors import DegenerateReference, InvalidDegree
from tracelab.trace_model import AssociationRecord as R, build_timelines


def graph(n, edges, directed=False):
    names = [f"v{i:03d}" for i in range(n)]
    return _from_edges(names, [(names[i], names[j]) for i, j in edges], directed)


def t1_graph(t1):
    aggs, _ = aggregate_pairs(extract_encounters(t1), t1)
    return build_er_graph(aggs, t1)


class TestBuild:
    def test_t1(self, t1):
        g = t1_graph(t1)
        assert g.nodes == ("A", "B", "C")
        assert g.edges() == [("A", "B")]

    def test_empty_window(self):
        g = build_er_graph([], ["A", "B"])
        assert g.edges() == [] and g.n == 2

    def test_triangle(self):
        tl = build_timelines([R(n, "X", 0, 10) for n in "ABC"])
        aggs, _ = aggregate_pairs(extract_encounters(tl), tl)
        assert build_er_graph(aggs, tl).edges() == [("A", "B"), ("A", "C"), ("B", "C")]


def _rows(source, scores):
    return [FriendshipRow(source, t, v, v, v) for t, v in scores.items()]


class TestFriendGraph:
    scores = {"B": 0.5, "C": 0.2, "D": 0.1}

    def test_top_third(self):
        g = build_friend_graph(_rows("A", self.scores), "t", "top", 1 / 3)
        assert g.edge_set() == {("A", "B")}

    def test_bottom_third(self):
        g = build_friend_graph(_rows("A", self.scores), "t", "bottom", 1 / 3)
        assert g.edge_set() == {("A", "D")}

    def test_middle_third(self):
        g = build_friend_graph(_rows("A", self.scores), "t", "middle", 1 / 3)
        assert g.edge_set() == {("A", "C")}

    def test_middle_resolves_toward_top(self):
        rows = _rows("A", {"B": 0.4, "C": 0.3, "D": 0.2, "E": 0.1})
        assert build_friend_graph(rows, "t", "middle", 0.25).edge_set() == {("A", "C")}

    def test_ties_by_partner_id(self):
        rows = _rows("A", {"D": 0.5, "B": 0.5, "C": 0.5})
        assert build_friend_graph(rows, "c", "top", 1 / 3).edge_set() == {("A", "B")}

    def test_invalid(self):
        with pytest.raises(ValueError):
            build_friend_graph(_rows("A", self.scores), "t", "top", 0.0)
        with pytest.raises(ValueError):
            build_friend_graph(_rows("A", self.scores), "q", "top", 0.5)
        with pytest.raises(ValueError):
            build_friend_graph(_rows("A", self.scores), "t", "side", 0.5)

    @given(traces())
    def test_full_fraction_is_directed_closure(self, records):
        from tracelab.encounters import friendship
        from tracelab.trace_model import account, sessions_by_node
        tl = build_timelines(records)
        events = extract_encounters(tl)
        sessions = sessions_by_node(tl)
        rows = friendship(events, {n: account(s) for n, s in sessions.items()}, sessions,
                          {n: t.locations for n, t in tl.items()})
        aggs, _ = aggregate_pairs(events, tl)
        er = build_er_graph(aggs, tl)
        for dim in "tcl":
            for seg in ("top", "middle", "bottom"):
                assert build_friend_graph(rows, dim, seg, 1.0, tl).edge_set() == er.edge_set()


class TestMetrics:
    def test_triangle(self):
        g = graph(3, [(0, 1), (1, 2), (0, 2)])
        m = average_path_length(g, 99.0)
        assert (m.cc, m.dr, m.pl, m.pl_con) == (1.0, 0.0, 1.0, 1.0)

    def test_path(self):
        m = average_path_length(graph(3, [(0, 1), (1, 2)]), 0.0)
        assert m.pl_con == pytest.approx(4 / 3, abs=1e-15) and m.dr == 0.0 and m.cc == 0.0

    def test_t1(self, t1):
        m = average_path_length(t1_graph(t1), 5.0)
        assert m.cc == 0.0
        assert m.dr == pytest.approx(2 / 3, abs=1e-15)
        assert m.pl == pytest.approx(1 / 3 * 1 + 2 / 3 * 5, abs=1e-15)

    def test_edgeless_and_connected(self):
        assert disconnected_ratio(graph(5, [])) == 1.0
        assert disconnected_ratio(graph(4, [(0, 1), (1, 2), (2, 3)])) == 0.0

    def test_complete_graph_and_tree(self):
        n = 7
        assert clustering_coefficient(graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])) == 1.0
        assert clustering_coefficient(graph(n, [(i, (i - 1) // 2) for i in range(1, n)])) == 0.0

    def test_directed_reachability(self):
        g = graph(3, [(0, 1), (1, 2)], directed=True)
        assert disconnected_ratio(g) == pytest.approx(3 / 6, abs=1e-15)

    def test_negative_penalty_rejected(self):
        with pytest.raises(ValueError):
            average_path_length(graph(2, []), -1.0)

    @pytest.mark.parametrize("directed", [False, True])
    def test_against_oracle(self, directed):
        rng = random.Random(7 + directed)
        for _ in range(15):
            n = rng.randint(1, 40)
            edges = oracles.random_edges(rng, n, rng.uniform(0.0, 0.2))
            g = graph(n, edges, directed)
            cc, dr, pl_con, pl = oracles.brute_metrics(oracles.dense_adjacency(n, edges, directed), 3.5)
            m = average_path_length(g, 3.5)
            assert (m.cc, m.dr, m.pl_con, m.pl) == pytest.approx((cc, dr, pl_con, pl), abs=1e-12)

    @given(st.integers(2, 25), st.floats(0, 0.5), st.randoms(use_true_random=False))
    def test_dr_zero_iff_connected_and_pl_identity(self, n, p, rnd):
        edges = oracles.random_edges(rnd, n, p)
        m = average_path_length(graph(n, edges), 4.0)
        d = oracles.floyd_warshall(oracles.dense_adjacency(n, edges, False))
        assert (m.dr == 0.0) == bool(np.isfinite(d).all())
        if m.dr == 0.0:
            assert m.pl == m.pl_con


class TestReference:
    def test_cycle(self):
        # distances from any node of C6 are 1, 1, 2, 2, 3 over 5 ordered
        # partners; 1.5 would need the zero self-distance in the mean
        m = average_path_length(make_reference("regular", 6, 2), 0.0)
        assert m.cc == 0.0 and m.pl_con == pytest.approx(9 / 5, abs=1e-15)
        adj = oracles.dense_adjacency(6, [(i, (i + 1) % 6) for i in range(6)], False)
        assert oracles.brute_metrics(adj, 0.0)[2] == pytest.approx(9 / 5, abs=1e-15)

    @pytest.mark.parametrize("d", [4, 6, 8])
    def test_lattice_cc_closed_form(self, d):
        cc = clustering_coefficient(make_reference("regular", 40, d))
        assert abs(cc - 3 * (d - 2) / (4 * (d - 1))) <= 1e-12

    def test_lattice_n20(self):
        assert clustering_coefficient(make_reference("regular", 20, 4)) == 0.5

    def test_random_is_seeded(self):
        assert make_reference("random", 50, 4, seed=3) == make_reference("random", 50, 4, seed=3)
        g = make_reference("random", 50, 4, seed=3)
        assert all(len(a) >= 4 for a in g.adj)
        assert all(i not in a for i, a in enumerate(g.adj))

    def test_invalid_degree(self):
        with pytest.raises(InvalidDegree):
            make_reference("regular", 10, 3)
        with pytest.raises(InvalidDegree):
            make_reference("regular", 4, 4)
        with pytest.raises(InvalidDegree):
            make_reference("random", 4, 4)
        with pytest.raises(ValueError):
            make_reference("lattice", 10, 2)

    def test_reference_degree(self):
        assert reference_degree(5.2, 100) == 6
        assert reference_degree(0.3, 100) == 2
        assert reference_degree(50.0, 10) == 8
        with pytest.raises(InvalidDegree):
            reference_degree(2.0, 2)


class TestNormalize:
    reg = GraphMetrics(0.6, 0.0, 10.0, 10.0, 10.0, 10, 4.0)
    rand = GraphMetrics(0.1, 0.0, 2.0, 2.0, 10.0, 10, 4.0)

    def _raw(self, cc, pl):
        return GraphMetrics(cc, 0.0, pl, pl, 10.0, 10, 4.0)

    def test_endpoints_and_midpoint(self):
        assert normalize(self._raw(0.6, 10.0), self.reg, self.rand).cc_norm == pytest.approx(1.0, abs=1e-15)
        assert normalize(self._raw(0.1, 2.0), self.reg, self.rand).pl_norm == pytest.approx(0.01, abs=1e-15)
        assert normalize(self._raw(0.35, 6.0), self.reg, self.rand).cc_norm == pytest.approx(0.505, abs=1e-15)

    def test_degenerate(self):
        with pytest.raises(DegenerateReference):
            normalize(self._raw(0.3, 3.0), self.reg, self.reg)


class TestEvolve:
    def test_node_count_monotone_and_empty_window(self):
        rng = random.Random(2)
        records = oracles.random_trace(rng, max_nodes=10, horizon=10_000)
        tl = build_timelines(records)
        start = min(t.first_online for t in tl.values())
        rows = evolve_metrics(tl, [1, 500, 2000, 5000, 10_000], seed=1)
        counts = [r.node_count for r in rows]
        assert counts == sorted(counts)

    def test_window_without_encounters(self):
        tl = build_timelines([R("A", "X", 0, 10), R("B", "Y", 0, 10), R("C", "X", 20, 30), R("D", "X", 25, 40),
                              R("E", "Z", 0, 5)])
        (row,) = evolve_metrics(tl, [10])
        assert row.dr == 1.0 and row.node_count == 3

    def test_small_world_on_clustered_graph(self):
        # ring lattice with a few shortcuts: the classic small-world regime
        n, d = 200, 10
        base = make_reference("regular", n, d)
        rng = random.Random(0)
        edges = [(i, j) for i, a in enumerate(base.adj) for j in a if i < j]
        edges += [(rng.randrange(n), rng.randrange(n)) for _ in range(20)]
        raw, reg, rand, norm, deg = small_world(graph(n, edges), seed=0)
        assert norm.cc_norm > 0.8 and norm.pl_norm < 0.4


def test_estimator():
    g = make_reference("regular", 30, 4)
    est = SmallWorldAnalyzer(seed=1).fit(g)
    assert est.transform().shape == (1, 5)
    assert est.normalized_.cc_norm == pytest.approx(1.0, abs=1e-12)
    assert est.get_params() == {"seed": 1, "degree": None}
    with pytest.raises(TypeError):
        SmallWorldAnalyzer().fit([1, 2])
