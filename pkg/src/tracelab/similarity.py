"""Location similarity of a user with itself across a time gap, and the
population-level network similarity index (NSI)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._parallel import pmap
from ._validation import check_positive, check_timelines
from .errors import GapTooLarge
from .trace_model import Timeline

OFFLINE = -1


@dataclass(frozen=True, eq=False)
class SnapshotGrid:
    """Associated location sampled every ``step`` seconds over existence time.

    ``cells[i]`` is the location code at ``origin + i * step`` or OFFLINE;
    ``codes`` maps location ids to those codes.
    """

    node: str
    step: int
    origin: int
    cells: np.ndarray
    codes: dict

    def location_at_cell(self, i):
        c = int(self.cells[i])
        if c == OFFLINE:
            return None
        return next(loc for loc, code in self.codes.items() if code == c)


@dataclass(frozen=True)
class NsiCurve:
    gaps: tuple[tuple[int, float], ...]
    node_counts: tuple[int, ...]
    pair_counts: tuple[int, ...]


def snapshot_grid(timeline: Timeline, step: int = 60, codes: dict | None = None) -> SnapshotGrid:
    check_positive(step, "step", integer=True)
    if codes is None:
        codes = {loc: i for i, loc in enumerate(sorted(timeline.locations))}
    origin = timeline.first_online
    n = -(-(timeline.last_offline - origin) // step)
    cells = np.full(n, OFFLINE, dtype=np.int32)
    for s in timeline.stays:
        lo = -(-(s.start - origin) // step)
        hi = -(-(s.end - origin) // step)
        cells[lo:hi] = codes[s.location]
    return SnapshotGrid(timeline.node, step, origin, cells, codes)


def _gap_cells(grid: SnapshotGrid, gap: int) -> int:
    k, rem = divmod(gap, grid.step)
    if rem or k < 1:
        raise ValueError(f"gap {gap} is not a positive multiple of step {grid.step}")
    if k >= len(grid.cells):
        raise GapTooLarge(f"gap {gap}s needs more than {len(grid.cells)} snapshots for node {grid.node!r}")
    return k


def _match_counts(grid: SnapshotGrid, k: int, count_offline_pairs: bool) -> tuple[int, int]:
    a = grid.cells[:-k]
    b = grid.cells[k:]
    matches = int(np.count_nonzero((a == b) & (a != OFFLINE)))
    if count_offline_pairs:
        pairs = a.size
    else:
        pairs = int(np.count_nonzero((a != OFFLINE) | (b != OFFLINE)))
    return matches, pairs


def location_similarity(grid: SnapshotGrid, gap: int, count_offline_pairs: bool = True) -> float:
    """Fraction of snapshot pairs ``gap`` apart at the same (online) location.

    Offline/offline pairs never match.  With ``count_offline_pairs=False``
    they are also dropped from the denominator, which turns the index
    into a conditional one: the share of pairs with at least one online
    snapshot that repeat the location.
    """
    k = _gap_cells(grid, gap)
    matches, pairs = _match_counts(grid, k, count_offline_pairs)
    return matches / pairs if pairs else 0.0


def nsi(grids, gaps, count_offline_pairs: bool = True, threads=None) -> NsiCurve:
    """Unweighted mean location similarity per gap over the nodes whose
    grid is long enough for that gap.  Gaps no node admits yield NaN."""
    grids = list(grids)
    gaps = [int(g) for g in gaps]

    def one_gap(gap):
        total, nodes, pairs = 0.0, 0, 0
        for g in grids:
            k, rem = divmod(gap, g.step)
            if rem or k < 1:
                raise ValueError(f"gap {gap} is not a positive multiple of step {g.step}")
            if k >= len(g.cells):
                continue
            m, p = _match_counts(g, k, count_offline_pairs)
            total += m / p if p else 0.0
            nodes += 1
            pairs += p
        return (total / nodes if nodes else float("nan")), nodes, pairs

    results = pmap(one_gap, gaps, threads)
    return NsiCurve(
        gaps=tuple((gap, r[0]) for gap, r in zip(gaps, results)),
        node_counts=tuple(r[1] for r in results),
        pair_counts=tuple(r[2] for r in results),
    )


def build_grids(timelines: dict[str, Timeline], step: int = 60) -> list[SnapshotGrid]:
    all_locs = sorted(frozenset().union(*(tl.locations for tl in timelines.values()))) if timelines else []
    codes = {loc: i for i, loc in enumerate(all_locs)}
    return [snapshot_grid(timelines[n], step, codes) for n in sorted(timelines)]


def default_gaps(step: int, max_gap: int = 8 * 86400, every: int = 3 * 3600) -> list[int]:
    every = max(step, every - every % step)
    return list(range(every, max_gap + 1, every))


class NetworkSimilarity(BaseEstimator):
    """Network similarity index over a set of gaps.

    Parameters
    ----------
    step : int
        Snapshot spacing in seconds.
    gaps : list of int or None
        Gaps in seconds, multiples of ``step``.  Defaults to every three
        hours up to eight days.
    count_offline_pairs : bool
        Keep offline/offline snapshot pairs in the denominator.
    threads : int or None
        Worker cap; falls back to ``TRACE_LAB_THREADS``.
    """

    def __init__(self, step=60, gaps=None, count_offline_pairs=True, threads=None):
        self.step = step
        self.gaps = gaps
        self.count_offline_pairs = count_offline_pairs
        self.threads = threads

    def fit(self, X, y=None):
        timelines = check_timelines(X)
        gaps = self.gaps if self.gaps is not None else default_gaps(self.step)
        self.grids_ = build_grids(timelines, self.step)
        self.curve_ = nsi(self.grids_, gaps, self.count_offline_pairs, self.threads)
        return self

