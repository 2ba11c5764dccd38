"""Pairwise encounter extraction, per-pair aggregates and friendship indexes."""
from __future__ import annotations

import bisect
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np
from sklearn.base import BaseEstimator

from ._parallel import pmap
from ._validation import check_timelines
from .errors import DegenerateVariance
from .trace_model import Interval, Session, Timeline, account, sessions_by_node

DIMENSIONS = ("t", "c", "l")


class EncounterEvent(NamedTuple):
    a: str
    b: str
    location: str
    start: int
    end: int

    @property
    def interval(self) -> Interval:
        return Interval(self.start, self.end)

    @property
    def duration(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class PairAggregate:
    a: str
    b: str
    total_events: int
    total_duration: int
    locations: frozenset[str]
    # co-location spells: events chained across handoffs made by both nodes
    spells: int


@dataclass(frozen=True)
class EncounterStats:
    node: str
    unique_count: int
    total_count: int
    unique_fraction: float
    spell_count: int


@dataclass(frozen=True)
class FriendshipRow:
    source: str
    target: str
    frd_t: float
    frd_c: float
    frd_l: float

    def index(self, dimension: str) -> float:
        return getattr(self, f"frd_{dimension}")


def _events_at_location(location: str, stays: list[tuple[int, int, str]]) -> list[EncounterEvent]:
    stays.sort()
    active: list[tuple[int, int, str]] = []
    out = []
    for s, e, n in stays:
        active = [x for x in active if x[1] > s]
        for as_, ae, an in active:
            if an == n:
                continue
            hi = min(e, ae)
            a, b = (n, an) if n < an else (an, n)
            out.append(EncounterEvent(a, b, location, s, hi))
        active.append((s, e, n))
    return out


def extract_encounters(timelines: dict[str, Timeline], threads=None) -> list[EncounterEvent]:
    """Every maximal same-location overlap between two nodes' stays.

    Events are sorted by (start, end, a, b, location).
    """
    by_loc: dict[str, list[tuple[int, int, str]]] = defaultdict(list)
    for node, tl in timelines.items():
        for st in tl.stays:
            by_loc[st.location].append((st.start, st.end, node))
    locs = sorted(by_loc)
    parts = pmap(lambda loc: _events_at_location(loc, by_loc[loc]), locs, threads)
    events = [ev for part in parts for ev in part]
    events.sort(key=lambda ev: (ev.start, ev.end, ev.a, ev.b, ev.location))
    return events


def clip_events(events: Iterable[EncounterEvent], window: Interval) -> list[EncounterEvent]:
    out = []
    for ev in events:
        lo, hi = max(ev.start, window.start), min(ev.end, window.end)
        if lo < hi:
            out.append(EncounterEvent(ev.a, ev.b, ev.location, lo, hi))
    return out


def aggregate_pairs(events: Iterable[EncounterEvent], population: Iterable[str]):
    """Per-pair totals and per-node encounter counts.

    Returns ``(aggregates, stats)`` where ``stats`` maps every node in
    ``population`` to its :class:`EncounterStats`.  The unique fraction
    is normalised by ``len(population) - 1``.  Besides per-location event
    counts, a pair's events that touch in time (both nodes moved together)
    are also tallied as one co-location spell.
    """
    count: dict[tuple[str, str], int] = defaultdict(int)
    duration: dict[tuple[str, str], int] = defaultdict(int)
    locs: dict[tuple[str, str], set] = defaultdict(set)
    spans: dict[tuple[str, str], list] = defaultdict(list)
    for ev in events:
        key = (ev.a, ev.b)
        count[key] += 1
        duration[key] += ev.end - ev.start
        locs[key].add(ev.location)
        spans[key].append((ev.start, ev.end))
    aggregates = [
        PairAggregate(a, b, count[(a, b)], duration[(a, b)], frozenset(locs[(a, b)]), _spells(spans[(a, b)]))
        for a, b in sorted(count)
    ]

    nodes = sorted(set(population))
    partners: dict[str, set] = defaultdict(set)
    totals: dict[str, int] = defaultdict(int)
    spells: dict[str, int] = defaultdict(int)
    for agg in aggregates:
        for x, y in ((agg.a, agg.b), (agg.b, agg.a)):
            partners[x].add(y)
            totals[x] += agg.total_events
            spells[x] += agg.spells
    denom = len(nodes) - 1
    stats = {
        n: EncounterStats(n, len(partners[n]), totals[n], len(partners[n]) / denom if denom > 0 else 0.0, spells[n])
        for n in nodes
    }
    return aggregates, stats


def _spells(spans: list[tuple[int, int]]) -> int:
    n, end = 0, None
    for s, e in sorted(spans):
        if end is None or s > end:
            n += 1
            end = e
        else:
            end = max(end, e)
    return n


def friendship(
    events: Iterable[EncounterEvent],
    accounting: dict,
    node_sessions: dict[str, list[Session]],
    location_sets: dict[str, frozenset[str]],
) -> list[FriendshipRow]:
    """Directional friendship indexes for every pair that met.

    For an ordered pair (A, B): ``frd_t`` is encounter time over A's online
    time, ``frd_c`` the share of A's sessions holding an encounter with B,
    ``frd_l`` the share of A's visited locations where they met.
    """
    starts = {n: [s.start for s in ss] for n, ss in node_sessions.items()}
    e_t: dict[tuple[str, str], int] = defaultdict(int)
    e_c: dict[tuple[str, str], set] = defaultdict(set)
    e_l: dict[tuple[str, str], set] = defaultdict(set)
    for ev in events:
        d = ev.end - ev.start
        for x, y in ((ev.a, ev.b), (ev.b, ev.a)):
            e_t[(x, y)] += d
            e_c[(x, y)].add(bisect.bisect_right(starts[x], ev.start) - 1)
            e_l[(x, y)].add(ev.location)
    rows = []
    for x, y in sorted(e_t):
        acc = accounting[x]
        rows.append(FriendshipRow(
            source=x,
            target=y,
            frd_t=e_t[(x, y)] / acc.total_online,
            frd_c=len(e_c[(x, y)]) / acc.session_count,
            frd_l=len(e_l[(x, y)]) / len(location_sets[x]),
        ))
    return rows


def _pearson(u: np.ndarray, v: np.ndarray, name: str) -> float:
    if u.size < 2:
        raise DegenerateVariance(f"{name}: need at least two pairs, got {u.size}")
    du, dv = u - u.mean(), v - v.mean()
    su, sv = np.sqrt(np.dot(du, du)), np.sqrt(np.dot(dv, dv))
    if su == 0 or sv == 0:
        raise DegenerateVariance(f"{name}: constant friendship vector")
    return float(np.clip(np.dot(du, dv) / (su * sv), -1.0, 1.0))


def friendship_asymmetry(rows: Iterable[FriendshipRow]) -> dict[str, float]:
    """Pearson correlation between Frd(A, B) and Frd(B, A) over unordered
    pairs, one coefficient per friendship dimension."""
    by_pair = {(r.source, r.target): r for r in rows}
    pairs = sorted((a, b) for a, b in by_pair if a < b and (b, a) in by_pair)
    out = {}
    for dim in DIMENSIONS:
        fwd = np.array([by_pair[(a, b)].index(dim) for a, b in pairs], dtype=float)
        rev = np.array([by_pair[(b, a)].index(dim) for a, b in pairs], dtype=float)
        out[dim] = _pearson(fwd, rev, f"frd_{dim}")
    return out


def pearson(u, v) -> float:
    return _pearson(np.asarray(u, dtype=float), np.asarray(v, dtype=float), "pearson")


class FriendshipIndex(BaseEstimator):
    """Encounters and friendship indexes for a trace.

    Fitted attributes: ``events_``, ``aggregates_``, ``encounter_stats_``,
    ``rows_`` and ``asymmetry_`` (None when a dimension is degenerate).
    """

    def __init__(self, threads=None):
        self.threads = threads

    def fit(self, X, y=None):
        timelines = check_timelines(X)
        sessions = sessions_by_node(timelines)
        accounting = {n: account(s) for n, s in sessions.items()}
        self.events_ = extract_encounters(timelines, self.threads)
        self.aggregates_, self.encounter_stats_ = aggregate_pairs(self.events_, timelines)
        self.rows_ = friendship(
            self.events_, accounting, sessions, {n: tl.locations for n, tl in timelines.items()}
        )
        try:
            self.asymmetry_ = friendship_asymmetry(self.rows_)
        except DegenerateVariance:
            self.asymmetry_ = None
        return self
