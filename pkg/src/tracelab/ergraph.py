"""Encounter-relationship graphs and their small-world metrics.

Graphs are stored as out-adjacency sets over integer node indices.  For an
undirected graph the adjacency is symmetric.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_fraction
from .encounters import (
    DIMENSIONS,
    EncounterEvent,
    FriendshipRow,
    PairAggregate,
    aggregate_pairs,
    clip_events,
    extract_encounters,
)
from .errors import DegenerateReference, InvalidDegree
from .trace_model import Interval, Timeline, clip_timelines, trace_span

SEGMENTS = ("top", "middle", "bottom")


@dataclass(frozen=True)
class ERGraph:
    nodes: tuple[str, ...]
    adj: tuple[frozenset[int], ...]
    directed: bool = False

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def mean_degree(self) -> float:
        """Mean (out-)degree."""
        return sum(len(a) for a in self.adj) / self.n if self.n else 0.0

    def edges(self) -> list[tuple[str, str]]:
        out = []
        for i, nbrs in enumerate(self.adj):
            for j in sorted(nbrs):
                if self.directed or i < j:
                    out.append((self.nodes[i], self.nodes[j]))
        return out

    def edge_set(self) -> set[tuple[str, str]]:
        """Ordered (source, target) pairs; both directions for undirected graphs."""
        return {(self.nodes[i], self.nodes[j]) for i, nbrs in enumerate(self.adj) for j in nbrs}


@dataclass(frozen=True)
class GraphMetrics:
    cc: float
    dr: float
    pl: float
    pl_con: float
    pl_disc: float
    node_count: int
    mean_degree: float


@dataclass(frozen=True)
class NormalizedMetrics:
    cc_norm: float
    pl_norm: float


@dataclass(frozen=True)
class WindowMetrics:
    window: int
    node_count: int
    mean_degree: float
    cc: float
    dr: float
    pl: float
    cc_norm: float
    pl_norm: float
    reference_degree: int


def _from_edges(nodes: Iterable[str], edges: Iterable[tuple[str, str]], directed: bool) -> ERGraph:
    nodes = tuple(sorted(set(nodes)))
    index = {n: i for i, n in enumerate(nodes)}
    adj: list[set] = [set() for _ in nodes]
    for u, v in edges:
        if u == v:
            continue
        i, j = index[u], index[v]
        adj[i].add(j)
        if not directed:
            adj[j].add(i)
    return ERGraph(nodes, tuple(frozenset(a) for a in adj), directed)


def build_er_graph(aggregates: Iterable[PairAggregate], nodes: Iterable[str]) -> ERGraph:
    """Undirected graph with an edge per pair that met; isolated nodes kept."""
    aggregates = list(aggregates)
    nodes = set(nodes) | {a.a for a in aggregates} | {a.b for a in aggregates}
    return _from_edges(nodes, ((a.a, a.b) for a in aggregates), directed=False)


def _take(count: int, length: int, segment: str) -> slice:
    if segment == "top":
        return slice(0, count)
    if segment == "bottom":
        return slice(length - count, length)
    if segment == "middle":
        lo = (length - count) // 2
        return slice(lo, lo + count)
    raise ValueError(f"segment must be one of {SEGMENTS}, got {segment!r}")


def build_friend_graph(
    rows: Iterable[FriendshipRow],
    dimension: str,
    segment: str,
    fraction: float,
    nodes: Iterable[str] = (),
) -> ERGraph:
    """Directed graph where each node links to a slice of its partners.

    Partners are ranked by the chosen friendship index (descending, ties by
    partner id) and ``ceil(fraction * len)`` of them are taken from the top,
    the bottom, or the centre of the list.
    """
    if dimension not in DIMENSIONS:
        raise ValueError(f"dimension must be one of {DIMENSIONS}, got {dimension!r}")
    check_fraction(fraction, "fraction", low_inclusive=False)
    partners: dict[str, list[tuple[float, str]]] = {}
    for r in rows:
        partners.setdefault(r.source, []).append((-r.index(dimension), r.target))
    all_nodes = set(nodes) | set(partners) | {t for lst in partners.values() for _, t in lst}
    edges = []
    for src, lst in partners.items():
        lst.sort()
        count = min(len(lst), math.ceil(fraction * len(lst) - 1e-9))
        edges.extend((src, tgt) for _, tgt in lst[_take(count, len(lst), segment)])
    return _from_edges(all_nodes, edges, directed=True)


def clustering_coefficient(g: ERGraph) -> float:
    """Mean local clustering; nodes with fewer than two (out-)neighbours
    count as zero.  The same neighbour-overlap count serves both the
    undirected and the directed (chosen-friends) definition."""
    if g.n == 0:
        return 0.0
    total = 0.0
    for nbrs in g.adj:
        k = len(nbrs)
        if k < 2:
            continue
        links = sum(len(g.adj[b] & nbrs) for b in nbrs)
        total += links / (k * (k - 1))
    return total / g.n


def _distance_matrix(g: ERGraph) -> np.ndarray:
    n = g.n
    rows = [i for i, nbrs in enumerate(g.adj) for _ in nbrs]
    cols = [j for nbrs in g.adj for j in sorted(nbrs)]
    m = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return shortest_path(m, directed=g.directed, unweighted=True)


def _reach_stats(g: ERGraph) -> tuple[float, float]:
    """(disconnected ratio, mean hop count over reachable ordered pairs)."""
    n = g.n
    if n < 2:
        return 0.0, 0.0
    dist = _distance_matrix(g)
    off = ~np.eye(n, dtype=bool)
    finite = np.isfinite(dist) & off
    reachable = int(finite.sum())
    dr = 1.0 - reachable / (n * (n - 1))
    pl_con = float(dist[finite].sum() / reachable) if reachable else 0.0
    return dr, pl_con


def disconnected_ratio(g: ERGraph) -> float:
    """Share of ordered pairs (A, B), A != B, with no path from A to B."""
    return _reach_stats(g)[0]


def average_path_length(g: ERGraph, pl_disc: float) -> GraphMetrics:
    """All graph metrics; disconnected pairs are charged ``pl_disc`` hops."""
    if pl_disc < 0:
        raise ValueError("pl_disc must be non-negative")
    dr, pl_con = _reach_stats(g)
    return GraphMetrics(
        cc=clustering_coefficient(g),
        dr=dr,
        pl=(1 - dr) * pl_con + dr * pl_disc,
        pl_con=pl_con,
        pl_disc=pl_disc,
        node_count=g.n,
        mean_degree=g.mean_degree,
    )


def make_reference(kind: str, n: int, d: int, seed=None) -> ERGraph:
    """Ring lattice (``regular``) or per-node random draws (``random``) with
    ``n`` nodes and nominal degree ``d``."""
    nodes = tuple(f"{i:06d}" for i in range(n))
    if kind == "regular":
        if d % 2 or d < 0 or d >= n:
            raise InvalidDegree(f"ring lattice needs even d < n, got n={n}, d={d}")
        half = d // 2
        adj = [frozenset(((i + k) % n for k in range(-half, half + 1) if k)) for i in range(n)]
        return ERGraph(nodes, tuple(adj), False)
    if kind == "random":
        if d < 0 or d >= n:
            raise InvalidDegree(f"random reference needs d < n, got n={n}, d={d}")
        rng = np.random.default_rng(seed)
        adj = [set() for _ in range(n)]
        for i in range(n):
            picks = rng.choice(n - 1, size=d, replace=False)
            for p in picks:
                j = int(p) + int(p >= i)
                adj[i].add(j)
                adj[j].add(i)
        return ERGraph(nodes, tuple(frozenset(a) for a in adj), False)
    raise ValueError(f"kind must be 'regular' or 'random', got {kind!r}")


def reference_degree(mean_degree: float, n: int) -> int:
    """Even degree closest to ``mean_degree`` that a ring lattice on ``n``
    nodes can carry (at least 2)."""
    top = n - 1 if (n - 1) % 2 == 0 else n - 2
    if top < 2:
        raise InvalidDegree(f"no ring lattice with degree >= 2 on {n} nodes")
    d = 2 * int(math.floor(mean_degree / 2 + 0.5))
    return min(max(d, 2), top)


def _norm(x, rand, reg, name):
    if reg == rand:
        raise DegenerateReference(f"{name}: regular and random references coincide ({reg})")
    return (x - rand) / (reg - rand) * 0.99 + 0.01


def normalize(raw: GraphMetrics, reg: GraphMetrics, rand: GraphMetrics) -> NormalizedMetrics:
    """Place CC and PL on a scale where 0.01 is the random reference and 1
    the regular one."""
    return NormalizedMetrics(
        cc_norm=_norm(raw.cc, rand.cc, reg.cc, "cc"),
        pl_norm=_norm(raw.pl, rand.pl, reg.pl, "pl"),
    )


def small_world(g: ERGraph, seed=0, degree: int | None = None):
    """Metrics of ``g`` with both references and the normalised values.

    Returns ``(metrics, regular, random, normalized, degree)``.  The
    regular reference's path length is the disconnection penalty for all
    three graphs.
    """
    d = reference_degree(g.mean_degree, g.n) if degree is None else degree
    reg_g = make_reference("regular", g.n, d)
    reg = average_path_length(reg_g, 0.0)
    pl_disc = reg.pl_con
    reg = average_path_length(reg_g, pl_disc)
    rand = average_path_length(make_reference("random", g.n, d, seed), pl_disc)
    raw = average_path_length(g, pl_disc)
    return raw, reg, rand, normalize(raw, reg, rand), d


def evolve_metrics(
    timelines: dict[str, Timeline],
    window_lengths: Iterable[int],
    events: list[EncounterEvent] | None = None,
    seed=0,
) -> list[WindowMetrics]:
    """Rebuild the ER graph on prefix windows anchored at trace start.

    ``events`` may carry the encounters of the whole trace; they are clipped
    to each window instead of re-extracted.
    """
    span = trace_span(timelines)
    if events is None:
        events = extract_encounters(timelines)
    out = []
    for length in window_lengths:
        window = Interval(span.start, span.start + int(length))
        nodes = clip_timelines(timelines, window)
        aggs, _ = aggregate_pairs(clip_events(events, window), nodes)
        g = build_er_graph(aggs, nodes)
        try:
            raw, _, _, norm, d = small_world(g, seed)
            cc_norm, pl_norm = norm.cc_norm, norm.pl_norm
        except (InvalidDegree, DegenerateReference):
            raw = average_path_length(g, 0.0)
            cc_norm = pl_norm = float("nan")
            d = 0
        out.append(WindowMetrics(int(length), g.n, g.mean_degree, raw.cc, raw.dr, raw.pl, cc_norm, pl_norm, d))
    return out


class SmallWorldAnalyzer(BaseEstimator):
    """Small-world characterisation of an ER graph.

    Parameters
    ----------
    seed : int
        Seed for the random reference graph.
    degree : int or None
        Reference degree; defaults to the even value nearest the graph's
        mean degree.
    """

    def __init__(self, seed=0, degree=None):
        self.seed = seed
        self.degree = degree

    def fit(self, X, y=None):
        if not isinstance(X, ERGraph):
            raise TypeError("SmallWorldAnalyzer.fit expects an ERGraph")
        (self.metrics_, self.regular_metrics_, self.random_metrics_,
         self.normalized_, self.degree_) = small_world(X, self.seed, self.degree)
        return self

    def transform(self, X=None):
        check_is_fitted(self, "metrics_")
        m, nm = self.metrics_, self.normalized_
        return np.array([[m.cc, m.dr, m.pl, nm.cc_norm, nm.pl_norm]])

    def get_feature_names_out(self, input_features=None):
        return np.array(["cc", "dr", "pl", "cc_norm", "pl_norm"], dtype=object)
