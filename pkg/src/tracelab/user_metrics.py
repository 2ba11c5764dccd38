"""Per-user activity and mobility metrics, AP prevalence and CCDF tables."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_timelines
from .errors import EmptyInput, EmptyTrace
from .trace_model import Session, Timeline, account, sessions_by_node

METRIC_NAMES = ("online_fraction", "session_count", "coverage", "handoff_total", "handoffs_per_session")


@dataclass(frozen=True)
class UserMetricRow:
    node: str
    online_fraction: float
    session_count: int
    coverage: float
    handoff_total: int
    handoffs_per_session: float


@dataclass(frozen=True)
class PrevalenceCurve:
    ranks: tuple[tuple[int, float], ...]
    # nodes that actually visited at least ``rank`` locations
    node_counts: tuple[int, ...]


@dataclass(frozen=True)
class CcdfTable:
    points: tuple[tuple[float, float], ...]

    @property
    def x(self) -> np.ndarray:
        return np.array([p[0] for p in self.points], dtype=float)

    @property
    def prob(self) -> np.ndarray:
        return np.array([p[1] for p in self.points], dtype=float)


def compute_user_metrics(node_sessions: dict[str, list[Session]], locations) -> list[UserMetricRow]:
    """One metric row per node, in node-id order.

    ``locations`` is the location universe used as the coverage
    denominator.
    """
    universe = frozenset(locations)
    if not node_sessions or not universe:
        raise EmptyTrace("no nodes or no locations")
    rows = []
    for node in sorted(node_sessions):
        sessions = node_sessions[node]
        if not sessions:
            continue
        acc = account(sessions)
        if acc.existence <= 0:
            continue
        visited = {st.location for s in sessions for st in s.stays}
        rows.append(UserMetricRow(
            node=node,
            online_fraction=acc.total_online / acc.existence,
            session_count=acc.session_count,
            coverage=len(visited & universe) / len(universe),
            handoff_total=acc.handoff_total,
            handoffs_per_session=acc.handoff_total / acc.session_count,
        ))
    if not rows:
        raise EmptyTrace("no node has a positive existence time")
    return rows


def location_prevalence(timeline: Timeline) -> dict[str, float]:
    """Fraction of the node's online time spent at each location."""
    per_loc: Counter = Counter()
    for s in timeline.stays:
        per_loc[s.location] += s.end - s.start
    total = sum(per_loc.values())
    return {loc: t / total for loc, t in per_loc.items()}


def prevalence_curve(timelines: dict[str, Timeline], max_rank: int) -> PrevalenceCurve:
    """Mean prevalence by per-node AP rank.

    Each node's prevalence values are sorted in descending order; rank k
    is averaged over all nodes, with nodes that visited fewer than k
    locations contributing zero.
    """
    if max_rank < 1:
        raise ValueError("max_rank must be >= 1")
    sums = np.zeros(max_rank)
    counts = np.zeros(max_rank, dtype=int)
    n = 0
    for tl in timelines.values():
        fracs = sorted(location_prevalence(tl).values(), reverse=True)[:max_rank]
        sums[: len(fracs)] += fracs
        counts[: len(fracs)] += 1
        n += 1
    if n == 0:
        raise EmptyInput("no timelines")
    means = sums / n
    return PrevalenceCurve(
        ranks=tuple((k + 1, float(means[k])) for k in range(max_rank)),
        node_counts=tuple(int(c) for c in counts),
    )


def ccdf(values) -> CcdfTable:
    """Empirical P(V > x) evaluated at each distinct value x."""
    arr = np.sort(np.asarray(list(values), dtype=float))
    if arr.size == 0:
        raise EmptyInput("ccdf of empty sample")
    xs, first = np.unique(arr, return_index=True)
    # number of values <= xs[i] is the start index of the next distinct value
    le = np.append(first[1:], arr.size)
    probs = (arr.size - le) / arr.size
    return CcdfTable(tuple(zip(xs.tolist(), probs.tolist())))


def metric_ccdfs(rows: list[UserMetricRow]) -> dict[str, CcdfTable]:
    return {name: ccdf([getattr(r, name) for r in rows]) for name in METRIC_NAMES}


class UserMetrics(TransformerMixin, BaseEstimator):
    """Per-node metric matrix for a set of timelines.

    ``fit`` records the location universe (the coverage denominator);
    ``transform`` returns an array with one row per node and the columns
    listed by :meth:`get_feature_names_out`.

    Parameters
    ----------
    max_rank : int
        Number of AP ranks kept in ``prevalence_``.
    """

    def __init__(self, max_rank=10):
        self.max_rank = max_rank

    def fit(self, X, y=None):
        timelines = check_timelines(X)
        if not timelines:
            raise EmptyTrace("no timelines")
        self.locations_ = frozenset().union(*(tl.locations for tl in timelines.values()))
        self.prevalence_ = prevalence_curve(timelines, self.max_rank)
        return self

    def transform(self, X):
        check_is_fitted(self, "locations_")
        timelines = check_timelines(X)
        rows = compute_user_metrics(sessions_by_node(timelines), self.locations_)
        self.nodes_ = [r.node for r in rows]
        return np.array([[getattr(r, m) for m in METRIC_NAMES] for r in rows], dtype=float)

    def get_feature_names_out(self, input_features=None):
        return np.array(METRIC_NAMES, dtype=object)


def node_location_sets(timelines: dict[str, Timeline]) -> dict[str, frozenset[str]]:
    return {node: tl.locations for node, tl in timelines.items()}

