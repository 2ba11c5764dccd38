"""CSV writers shared by the command-line front end."""
from __future__ import annotations

import csv
import hashlib
import math
import os
from typing import Iterable, Sequence

from .diffusion import SweepRow, SweepSummary
from .encounters import EncounterEvent, EncounterStats, FriendshipRow, PairAggregate
from .ergraph import ERGraph, WindowMetrics
from .statfit import FitResult
from .user_metrics import METRIC_NAMES, CcdfTable, PrevalenceCurve, UserMetricRow


def fmt(v) -> str:
    """Stable text form: ints verbatim, floats by shortest round-trip repr."""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_ccdf_csv(path: str) -> CcdfTable:
    """Read an ``x,prob`` table such as the ``ccdf_<metric>.csv`` outputs."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return CcdfTable(())
    header = [c.strip() for c in rows[0]]
    try:
        xi, pi = header.index("x"), header.index("prob")
        body = rows[1:]
    except ValueError:
        xi, pi, body = 0, 1, rows
    return CcdfTable(tuple((float(r[xi]), float(r[pi])) for r in body if r))


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def user_metrics_csv(out, rows: list[UserMetricRow]):
    write_csv(os.path.join(out, "user_metrics.csv"), ("node",) + METRIC_NAMES,
              ((r.node,) + tuple(getattr(r, m) for m in METRIC_NAMES) for r in rows))


def prevalence_csv(out, curve: PrevalenceCurve):
    write_csv(os.path.join(out, "prevalence.csv"), ("rank", "prevalence", "node_count"),
              ((k, v, c) for (k, v), c in zip(curve.ranks, curve.node_counts)))


def ccdf_csv(out, name: str, table: CcdfTable):
    write_csv(os.path.join(out, f"ccdf_{name}.csv"), ("x", "prob"), table.points)


def nsi_csv(out, curve):
    write_csv(os.path.join(out, "nsi.csv"), ("gap_seconds", "nsi", "node_count"),
              ((g, v, c) for (g, v), c in zip(curve.gaps, curve.node_counts)))


def encounters_csv(out, events: list[EncounterEvent]):
    write_csv(os.path.join(out, "encounters.csv"), ("a", "b", "location", "start", "end"), events)


def pair_aggregates_csv(out, aggs: list[PairAggregate]):
    write_csv(os.path.join(out, "pair_aggregates.csv"),
              ("a", "b", "total_events", "total_duration", "spells", "locations"),
              ((g.a, g.b, g.total_events, g.total_duration, g.spells, ";".join(sorted(g.locations)))
               for g in aggs))


def encounter_stats_csv(out, stats: dict[str, EncounterStats]):
    write_csv(os.path.join(out, "encounter_stats.csv"),
              ("node", "unique_count", "total_count", "unique_fraction", "spell_count"),
              ((s.node, s.unique_count, s.total_count, s.unique_fraction, s.spell_count)
               for _, s in sorted(stats.items())))


def friendship_csv(out, rows: list[FriendshipRow]):
    write_csv(os.path.join(out, "friendship.csv"), ("source", "target", "frd_t", "frd_c", "frd_l"),
              ((r.source, r.target, r.frd_t, r.frd_c, r.frd_l) for r in rows))


def asymmetry_csv(out, coeffs: dict | None):
    rows = [] if coeffs is None else [(d, coeffs[d]) for d in sorted(coeffs)]
    write_csv(os.path.join(out, "friendship_asymmetry.csv"), ("dimension", "pearson"), rows)


def ergraph_metrics_csv(out, metrics: list[WindowMetrics]):
    write_csv(os.path.join(out, "ergraph_metrics.csv"),
              ("window", "n", "mean_degree", "cc", "dr", "pl", "cc_norm", "pl_norm", "reference_degree"),
              ((m.window, m.node_count, m.mean_degree, m.cc, m.dr, m.pl, m.cc_norm, m.pl_norm,
                m.reference_degree) for m in metrics))


def edges_csv(out, g: ERGraph, name="edges.csv"):
    write_csv(os.path.join(out, name), ("source", "target"), g.edges())


def fit_results_csv(out, entries: list[tuple[str, str, FitResult | None, str]]):
    """``entries`` holds (input name, distribution, result or None, status)."""
    rows = []
    for source, dist, res, status in entries:
        if res is None:
            rows.append((source, dist, "", "nan", "nan", status))
        else:
            params = ";".join(f"{k}={fmt(float(v))}" for k, v in res.params._asdict().items())
            rows.append((source, dist, params, res.sse, res.d_stat, status))
    write_csv(os.path.join(out, "fit_results.csv"),
              ("input", "distribution", "params", "sse", "d_stat", "status"), rows)


def diffusion_csv(out, rows: list[SweepRow], summary: list[SweepSummary]):
    write_csv(os.path.join(out, "diffusion.csv"),
              ("window", "selfish_fraction", "source", "receive_ratio", "mean_delay"),
              ((r.window, r.selfish_fraction, r.source, r.receive_ratio, r.mean_delay) for r in rows))
    write_csv(os.path.join(out, "diffusion_summary.csv"),
              ("window", "selfish_fraction", "mean_receive_ratio", "mean_delay", "sources", "population"),
              ((s.window, s.selfish_fraction, s.mean_receive_ratio, s.mean_delay, s.sources, s.population)
               for s in summary))
