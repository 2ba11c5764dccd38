"""Trace file parsing, poll-based reconstruction and polling emulation.

Event traces are CSV ``node,location,start,end``; poll traces are CSV
``time,node,location``.  The header row is optional on input and always
written on output.
"""
from __future__ import annotations

import csv
import io
from collections import defaultdict
from typing import Iterable, NamedTuple, TextIO

from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_positive
from .errors import ConflictingAssociation, MalformedLine, NegativeDuration
from .trace_model import AssociationRecord

EVENT_HEADER = ("node", "location", "start", "end")
POLL_HEADER = ("time", "node", "location")

CONSERVATIVE = 1
RELAXED = 4


class PollSample(NamedTuple):
    time: int
    node: str
    location: str


class PollingPolicy(NamedTuple):
    interval: int
    hold_multiplier: int = CONSERVATIVE

    @classmethod
    def named(cls, name: str, interval: int) -> "PollingPolicy":
        holds = {"conservative": CONSERVATIVE, "relaxed": RELAXED}
        try:
            return cls(interval, holds[name])
        except KeyError:
            raise ValueError(f"unknown polling policy {name!r}; expected one of {sorted(holds)}") from None


def _lines(source) -> Iterable[str]:
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def _parse_int(text, lineno, column):
    try:
        return int(text.strip())
    except ValueError:
        raise MalformedLine(lineno, f"{column} is not an integer: {text!r}") from None


def _rows(source, header):
    reader = csv.reader(_lines(source))
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        cells = [c.strip() for c in row]
        if lineno == 1 and tuple(cells) == header:
            continue
        if len(cells) != len(header):
            raise MalformedLine(lineno, f"expected {len(header)} columns, got {len(cells)}")
        yield lineno, cells


def parse_event_trace(source: TextIO | str) -> list[AssociationRecord]:
    records = []
    for lineno, (node, location, start, end) in _rows(source, EVENT_HEADER):
        if not node or not location:
            raise MalformedLine(lineno, "empty node or location")
        s = _parse_int(start, lineno, "start")
        e = _parse_int(end, lineno, "end")
        if s < 0:
            raise MalformedLine(lineno, f"negative start time {s}")
        if e <= s:
            raise NegativeDuration(f"line {lineno}: start {s} >= end {e}")
        records.append(AssociationRecord(node, location, s, e))
    return records


def parse_poll_trace(source: TextIO | str) -> list[PollSample]:
    """Parse, deduplicate and sort poll samples by (node, time)."""
    seen: dict[tuple[str, int], str] = {}
    for lineno, (time, node, location) in _rows(source, POLL_HEADER):
        t = _parse_int(time, lineno, "time")
        if t < 0:
            raise MalformedLine(lineno, f"negative time {t}")
        if not node or not location:
            raise MalformedLine(lineno, "empty node or location")
        prev = seen.get((node, t))
        if prev is not None and prev != location:
            raise ConflictingAssociation(
                f"line {lineno}: node {node!r} polled at {prev!r} and {location!r} at time {t}"
            )
        seen[(node, t)] = location
    return sorted((PollSample(t, n, loc) for (n, t), loc in seen.items()), key=lambda p: (p.node, p.time))


def reconstruct_from_polls(samples: Iterable[PollSample], policy: PollingPolicy) -> list[AssociationRecord]:
    """Turn poll samples back into association records.

    A sample at ``t`` holds the node at its location until
    ``t + hold_multiplier * interval`` or until the node's next sample,
    whichever comes first.  Same-location holds that touch are merged.
    """
    check_positive(policy.interval, "interval")
    check_positive(policy.hold_multiplier, "hold_multiplier", integer=True)
    hold = policy.hold_multiplier * policy.interval

    per_node: dict[str, list[PollSample]] = defaultdict(list)
    for p in samples:
        per_node[p.node].append(p)

    out: list[AssociationRecord] = []
    for node in sorted(per_node):
        polls = sorted(per_node[node], key=lambda p: p.time)
        merged: list[list] = []
        for i, p in enumerate(polls):
            end = p.time + hold
            if i + 1 < len(polls) and polls[i + 1].time < end:
                end = polls[i + 1].time
            if end <= p.time:
                # duplicate timestamps; parse_poll_trace removes these
                continue
            if merged and merged[-1][0] == p.location and merged[-1][2] >= p.time:
                merged[-1][2] = max(merged[-1][2], end)
            else:
                merged.append([p.location, p.time, end])
        out.extend(AssociationRecord(node, loc, s, e) for loc, s, e in merged)
    return out


def emulate_polling(records: Iterable[AssociationRecord], interval: int) -> list[PollSample]:
    """Sample an event trace at epochs 0, interval, 2*interval, ...

    A stay ``[start, end)`` is seen at every epoch it contains; stays that
    straddle no epoch disappear.
    """
    check_positive(interval, "interval", integer=True)
    out = []
    for r in records:
        first = -(-r.start // interval) * interval
        for t in range(first, r.end, interval):
            out.append(PollSample(t, r.node, r.location))
    out.sort(key=lambda p: (p.node, p.time))
    return out


def write_event_trace(records: Iterable[AssociationRecord], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(EVENT_HEADER)
    for r in records:
        w.writerow((r.node, r.location, r.start, r.end))


def write_poll_trace(samples: Iterable[PollSample], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(POLL_HEADER)
    for p in samples:
        w.writerow((p.time, p.node, p.location))


class PollReconstructor(TransformerMixin, BaseEstimator):
    """Estimator-style wrapper around :func:`reconstruct_from_polls`.

    Parameters
    ----------
    interval : int
        Polling interval in seconds.
    hold_multiplier : int
        Number of intervals a sample is assumed to last: 1 is the
        conservative assumption, 4 the relaxed one.
    """

    def __init__(self, interval=60, hold_multiplier=CONSERVATIVE):
        self.interval = interval
        self.hold_multiplier = hold_multiplier

    def fit(self, X=None, y=None):
        check_positive(self.interval, "interval")
        check_positive(self.hold_multiplier, "hold_multiplier", integer=True)
        self.policy_ = PollingPolicy(self.interval, self.hold_multiplier)
        return self

    def transform(self, X):
        if not hasattr(self, "policy_"):
            self.fit()
        return reconstruct_from_polls(X, self.policy_)
