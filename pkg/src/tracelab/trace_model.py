"""In-memory association traces: records, per-node timelines, sessions and
time accounting.

Times are integer seconds since a per-trace epoch.  A stay covers the
half-open span ``[start, end)``.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .errors import ConflictingAssociation, EmptyInput, NegativeDuration


class Interval(NamedTuple):
    start: int
    end: int

    @property
    def duration(self) -> int:
        return self.end - self.start

    def intersect(self, other: "Interval") -> "Interval | None":
        lo = max(self.start, other.start)
        hi = min(self.end, other.end)
        return Interval(lo, hi) if lo < hi else None


class AssociationRecord(NamedTuple):
    node: str
    location: str
    start: int
    end: int

    @property
    def interval(self) -> Interval:
        return Interval(self.start, self.end)


class Stay(NamedTuple):
    location: str
    start: int
    end: int

    @property
    def duration(self) -> int:
        return self.end - self.start


def make_record(node, location, start, end) -> AssociationRecord:
    """Validate and build a record; zero-length and inverted stays are rejected."""
    if not node:
        raise ValueError("empty node id")
    if not location:
        raise ValueError("empty location id")
    start, end = int(start), int(end)
    if end <= start:
        raise NegativeDuration(f"stay of {node!r} at {location!r} has start {start} >= end {end}")
    return AssociationRecord(str(node), str(location), start, end)


@dataclass(frozen=True)
class Timeline:
    node: str
    stays: tuple[Stay, ...]

    @property
    def first_online(self) -> int:
        return self.stays[0].start

    @property
    def last_offline(self) -> int:
        return self.stays[-1].end

    @property
    def locations(self) -> frozenset[str]:
        return frozenset(s.location for s in self.stays)

    def online_time(self) -> int:
        return sum(s.end - s.start for s in self.stays)

    def location_at(self, t: int) -> str | None:
        # linear scan is fine for the call sites (tests, small fixtures)
        for s in self.stays:
            if s.start <= t < s.end:
                return s.location
        return None

    def clip(self, window: Interval) -> "Timeline | None":
        """Restrict to ``window``; None when nothing remains."""
        clipped = []
        for s in self.stays:
            lo, hi = max(s.start, window.start), min(s.end, window.end)
            if lo < hi:
                clipped.append(Stay(s.location, lo, hi))
        return Timeline(self.node, tuple(clipped)) if clipped else None

    def to_records(self) -> list[AssociationRecord]:
        return [AssociationRecord(self.node, s.location, s.start, s.end) for s in self.stays]


@dataclass(frozen=True)
class Session:
    node: str
    start: int
    end: int
    stays: tuple[Stay, ...]

    @property
    def interval(self) -> Interval:
        return Interval(self.start, self.end)

    @property
    def duration(self) -> int:
        return self.end - self.start

    @property
    def handoffs(self) -> int:
        return len(self.stays) - 1


@dataclass(frozen=True)
class NodeAccounting:
    node: str
    total_online: int
    existence: int
    session_count: int
    handoff_total: int

    @property
    def online_fraction(self) -> float:
        return self.total_online / self.existence


def _merge_node_stays(node: str, stays: list[Stay]) -> tuple[Stay, ...]:
    stays.sort(key=lambda s: (s.start, s.end))
    merged: list[Stay] = []
    for s in stays:
        if merged:
            last = merged[-1]
            if s.start < last.end:
                if s.location != last.location:
                    raise ConflictingAssociation(
                        f"node {node!r} at {last.location!r} [{last.start},{last.end}) "
                        f"and {s.location!r} [{s.start},{s.end}) simultaneously"
                    )
                if s.end > last.end:
                    merged[-1] = Stay(last.location, last.start, s.end)
                continue
            if s.start == last.end and s.location == last.location:
                merged[-1] = Stay(last.location, last.start, s.end)
                continue
        merged.append(s)
    return tuple(merged)


def build_timelines(records: Iterable[AssociationRecord]) -> dict[str, Timeline]:
    """Group records per node into sorted, merged timelines.

    Same-location records that overlap or touch are unioned; overlapping
    records at different locations raise ConflictingAssociation.  The
    returned dict is ordered by node id.
    """
    per_node: dict[str, list[Stay]] = defaultdict(list)
    for r in records:
        if r.end <= r.start:
            raise NegativeDuration(f"stay of {r.node!r} has start {r.start} >= end {r.end}")
        per_node[r.node].append(Stay(r.location, r.start, r.end))
    return {node: Timeline(node, _merge_node_stays(node, per_node[node])) for node in sorted(per_node)}


def derive_sessions(timeline: Timeline) -> list[Session]:
    """Split a timeline into association sessions.

    Consecutive stays with no gap (a handoff) stay in the same session; any
    positive gap starts a new one.
    """
    sessions: list[Session] = []
    run: list[Stay] = []
    for s in timeline.stays:
        if run and s.start > run[-1].end:
            sessions.append(Session(timeline.node, run[0].start, run[-1].end, tuple(run)))
            run = []
        run.append(s)
    if run:
        sessions.append(Session(timeline.node, run[0].start, run[-1].end, tuple(run)))
    return sessions


def account(node_sessions: list[Session]) -> NodeAccounting:
    if not node_sessions:
        raise EmptyInput("no sessions to account")
    node = node_sessions[0].node
    return NodeAccounting(
        node=node,
        total_online=sum(s.duration for s in node_sessions),
        existence=node_sessions[-1].end - node_sessions[0].start,
        session_count=len(node_sessions),
        handoff_total=sum(s.handoffs for s in node_sessions),
    )


def sessions_by_node(timelines: dict[str, Timeline]) -> dict[str, list[Session]]:
    return {node: derive_sessions(tl) for node, tl in timelines.items()}


def trace_span(timelines: dict[str, Timeline]) -> Interval:
    if not timelines:
        raise EmptyInput("empty trace")
    return Interval(
        min(tl.first_online for tl in timelines.values()),
        max(tl.last_offline for tl in timelines.values()),
    )


def clip_timelines(timelines: dict[str, Timeline], window: Interval) -> dict[str, Timeline]:
    """Restrict every timeline to ``window``, dropping nodes absent from it."""
    out = {}
    for node, tl in timelines.items():
        c = tl.clip(window)
        if c is not None:
            out[node] = c
    return out
