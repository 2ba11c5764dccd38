"""Epidemic (flood-to-every-contact) information diffusion over encounters,
with selfish nodes that receive but never relay."""
from __future__ import annotations

import bisect
import heapq
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from sklearn.base import BaseEstimator

from ._parallel import pmap
from ._validation import check_fraction, check_timelines
from .encounters import EncounterEvent, aggregate_pairs, clip_events, extract_encounters
from .errors import UnknownSource
from .trace_model import Interval, Timeline, clip_timelines, trace_span

SELFISH_ORDERS = ("unique", "random")


@dataclass(frozen=True)
class DiffusionConfig:
    window: Interval | None = None
    source_fraction: float = 0.30
    selfish_fraction: float = 0.0
    selfish_order: str = "unique"
    seed: int = 0

    def __post_init__(self):
        check_fraction(self.source_fraction, "source_fraction", low_inclusive=False)
        check_fraction(self.selfish_fraction, "selfish_fraction", high_inclusive=False)
        if self.selfish_order not in SELFISH_ORDERS:
            raise ValueError(f"selfish_order must be one of {SELFISH_ORDERS}")


@dataclass(frozen=True)
class DiffusionResult:
    source: str
    start: int
    delivered: frozenset[str]
    infection_times: dict = field(compare=False, repr=False)
    receive_ratio: float
    mean_delay: float


class ContactIndex:
    """Per node, per partner: the pair's encounter intervals sorted in time.

    A pair's encounters never overlap (a node is at one location at a time),
    so sorting by start also sorts by end.
    """

    def __init__(self, events: Iterable[EncounterEvent]):
        spans: dict[str, dict[str, list[tuple[int, int]]]] = defaultdict(lambda: defaultdict(list))
        for ev in events:
            spans[ev.a][ev.b].append((ev.start, ev.end))
            spans[ev.b][ev.a].append((ev.start, ev.end))
        self.contacts: dict[str, list[tuple[str, list[int], list[int]]]] = {}
        for u, partners in spans.items():
            entries = []
            for v in sorted(partners):
                iv = sorted(partners[v])
                entries.append((v, [s for s, _ in iv], [e for _, e in iv]))
            self.contacts[u] = entries


def run_epidemic(
    contacts: ContactIndex,
    source: str,
    start: int,
    population: Iterable[str],
    selfish: frozenset[str] = frozenset(),
) -> DiffusionResult:
    """Earliest-arrival flood from ``source`` starting at ``start``.

    A node infected at time t reaches a partner at max(t, s) over their
    first encounter [s, e) with e > t.  Handing over mid-encounter is
    immediate, so several hops can happen inside one overlap.  Selfish
    nodes (other than the source) never pass the message on.
    """
    population = frozenset(population)
    if source not in population:
        raise UnknownSource(f"source {source!r} is not in the population")
    times = {source: start}
    heap = [(start, source)]
    done = set()
    while heap:
        t, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u != source and u in selfish:
            continue
        for v, starts, ends in contacts.contacts.get(u, ()):
            if v in done:
                continue
            i = bisect.bisect_right(ends, t)
            if i == len(ends):
                continue
            cand = starts[i] if starts[i] > t else t
            if cand < times.get(v, math.inf):
                times[v] = cand
                heapq.heappush(heap, (cand, v))
    delivered = frozenset(n for n in times if n in population)
    delays = [times[n] - start for n in delivered if n != source]
    return DiffusionResult(
        source=source,
        start=start,
        delivered=delivered,
        infection_times=dict(times),
        receive_ratio=len(delivered) / len(population),
        mean_delay=float(np.mean(delays)) if delays else float("nan"),
    )


def earliest_sources(timelines: dict[str, Timeline], fraction: float) -> list[str]:
    """The ``ceil(fraction * N)`` nodes that come online first (ties by id)."""
    order = sorted(timelines, key=lambda n: (timelines[n].first_online, n))
    return order[: max(1, math.ceil(fraction * len(order) - 1e-9))]


def selfish_ranking(timelines: dict[str, Timeline], events, order: str = "unique", seed=0) -> list[str]:
    """Nodes in the order they are made selfish."""
    nodes = sorted(timelines)
    if order == "random":
        rng = np.random.default_rng(seed)
        return [nodes[i] for i in rng.permutation(len(nodes))]
    if order != "unique":
        raise ValueError(f"selfish_order must be one of {SELFISH_ORDERS}")
    _, stats = aggregate_pairs(events, nodes)
    return sorted(nodes, key=lambda n: (-stats[n].unique_count, n))


def selfish_count(fraction: float, population: int) -> int:
    return int(math.floor(fraction * population + 0.5))


@dataclass(frozen=True)
class SweepRow:
    window: int
    selfish_fraction: float
    source: str
    receive_ratio: float
    mean_delay: float


@dataclass(frozen=True)
class SweepSummary:
    window: int
    selfish_fraction: float
    mean_receive_ratio: float
    mean_delay: float
    sources: int
    population: int


def _runs(timelines, contacts, ranking, selfish_fraction, source_fraction, threads):
    selfish_all = frozenset(ranking[: selfish_count(selfish_fraction, len(timelines))])
    population = frozenset(timelines)

    def one(src):
        return run_epidemic(contacts, src, timelines[src].first_online, population, selfish_all - {src})

    return pmap(one, earliest_sources(timelines, source_fraction), threads)


def simulate(timelines, events, config: DiffusionConfig, threads=None) -> list[DiffusionResult]:
    """One run per source (earliest ``source_fraction`` of the nodes)."""
    if config.window is not None:
        timelines = clip_timelines(timelines, config.window)
        events = clip_events(events, config.window)
    events = list(events)
    ranking = selfish_ranking(timelines, events, config.selfish_order, config.seed)
    return _runs(timelines, ContactIndex(events), ranking, config.selfish_fraction,
                 config.source_fraction, threads)


def sweep_selfish(
    timelines: dict[str, Timeline],
    events: list[EncounterEvent],
    window_lengths: Iterable[int],
    fractions: Iterable[float],
    source_fraction: float = 0.30,
    selfish_order: str = "unique",
    seed: int = 0,
    threads=None,
) -> tuple[list[SweepRow], list[SweepSummary]]:
    """Receive ratio and delay for each (window, selfish fraction).

    Windows are prefixes anchored at trace start.  Within a window the
    selfish set at a larger fraction always contains the set at a smaller
    one.
    """
    fractions = [check_fraction(float(f), "selfish fraction", high_inclusive=False) for f in fractions]
    if fractions != sorted(fractions):
        raise ValueError("selfish fractions must be sorted ascending")
    check_fraction(source_fraction, "source_fraction", low_inclusive=False)
    span = trace_span(timelines)
    rows, summary = [], []
    for length in window_lengths:
        window = Interval(span.start, span.start + int(length))
        tl_w = clip_timelines(timelines, window)
        ev_w = clip_events(events, window)
        contacts = ContactIndex(ev_w)
        ranking = selfish_ranking(tl_w, ev_w, selfish_order, seed)
        for f in fractions:
            results = _runs(tl_w, contacts, ranking, f, source_fraction, threads)
            for r in results:
                rows.append(SweepRow(int(length), f, r.source, r.receive_ratio, r.mean_delay))
            delays = [r.mean_delay for r in results if not math.isnan(r.mean_delay)]
            summary.append(SweepSummary(
                window=int(length),
                selfish_fraction=f,
                mean_receive_ratio=float(np.mean([r.receive_ratio for r in results])),
                mean_delay=float(np.mean(delays)) if delays else float("nan"),
                sources=len(results),
                population=len(tl_w),
            ))
    return rows, summary


class EpidemicDiffusion(BaseEstimator):
    """Epidemic diffusion from the earliest-appearing nodes of a trace.

    Parameters
    ----------
    window : Interval or None
        Analysis window; the whole trace when None.
    source_fraction : float
        Share of nodes, earliest first, used as sources.
    selfish_fraction : float
        Share of nodes that refuse to relay.
    selfish_order : {'unique', 'random'}
        'unique' makes the nodes with most distinct partners selfish first.
    seed : int
        Seed for the random selfish order.
    threads : int or None
        Worker cap; falls back to ``TRACE_LAB_THREADS``.
    """

    def __init__(self, window=None, source_fraction=0.30, selfish_fraction=0.0,
                 selfish_order="unique", seed=0, threads=None):
        self.window = window
        self.source_fraction = source_fraction
        self.selfish_fraction = selfish_fraction
        self.selfish_order = selfish_order
        self.seed = seed
        self.threads = threads

    def fit(self, X, y=None, events=None):
        timelines = check_timelines(X)
        if events is None:
            events = extract_encounters(timelines, self.threads)
        cfg = DiffusionConfig(self.window, self.source_fraction, self.selfish_fraction,
                              self.selfish_order, self.seed)
        self.results_ = simulate(timelines, events, cfg, self.threads)
        self.receive_ratio_ = float(np.mean([r.receive_ratio for r in self.results_]))
        delays = [r.mean_delay for r in self.results_ if not math.isnan(r.mean_delay)]
        self.mean_delay_ = float(np.mean(delays)) if delays else float("nan")
        return self
