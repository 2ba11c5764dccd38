"""Command-line front end: ``trace-lab <command> ...``.

Every command writes its CSV outputs plus ``manifest.json`` into ``--out``.
Outputs are staged in a sibling temporary directory and moved into place
only when the command succeeds.

Exit status: 0 success, 2 usage error, 3 data error, 4 internal error.
"""
from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
import traceback

from . import __version__
from . import _io
from .diffusion import SELFISH_ORDERS, sweep_selfish
from .encounters import (
    DIMENSIONS,
    aggregate_pairs,
    extract_encounters,
    friendship,
    friendship_asymmetry,
)
from .ergraph import SEGMENTS, average_path_length, build_er_graph, build_friend_graph, evolve_metrics, small_world
from .errors import DegenerateReference, DegenerateVariance, InsufficientPoints, InvalidDegree, InvalidInterval, TraceError
from .ingest import (
    PollingPolicy,
    emulate_polling,
    parse_event_trace,
    parse_poll_trace,
    reconstruct_from_polls,
    write_event_trace,
    write_poll_trace,
)
from .similarity import build_grids, default_gaps, nsi
from .statfit import fit_bipareto, fit_exponential
from .synthgen import CampusSpec, generate
from .trace_model import Interval, account, build_timelines, clip_timelines, sessions_by_node, trace_span
from .user_metrics import compute_user_metrics, ccdf, metric_ccdfs, prevalence_curve

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4
DAY = 86400
UNITS = {"s": 1, "m": 60, "h": 3600, "d": DAY}


class UsageError(Exception):
    pass


# -- argument types ---------------------------------------------------------

def duration(text: str) -> int:
    """Seconds, optionally suffixed with s, m, h or d (``90m``, ``7d``)."""
    text = str(text).strip()
    mult = UNITS.get(text[-1:], None)
    body = text[:-1] if mult else text
    try:
        value = int(body) * (mult or 1)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a duration: {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError(f"duration must be positive: {text!r}")
    return value


def duration_list(text) -> list[int]:
    if isinstance(text, list):
        return [duration(t) for t in text]
    return [duration(t) for t in str(text).split(",") if t.strip()]


def fraction_list(text) -> list[float]:
    items = text if isinstance(text, list) else [t for t in str(text).split(",") if t.strip()]
    try:
        return [float(t) for t in items]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of fractions: {text!r}") from None


def name_list(choices):
    def parse(text):
        items = text if isinstance(text, list) else [t.strip() for t in str(text).split(",") if t.strip()]
        bad = [t for t in items if t not in choices]
        if bad:
            raise argparse.ArgumentTypeError(f"unknown value(s) {bad}; choose from {list(choices)}")
        return items
    return parse


def window_arg(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(v) for v in str(text).split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like START:END, got {text!r}") from None
    if hi <= lo:
        raise argparse.ArgumentTypeError(f"window end must exceed start: {text!r}")
    return lo, hi


# -- parser ----------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
    g.add_argument("--threads", type=int, default=None,
                   help="worker cap; falls back to TRACE_LAB_THREADS, then 1")
    g.add_argument("--config", default=None,
                   help="JSON file of option defaults (keys are option names with '_' for '-')")
    return p


def _trace_input() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("trace input")
    g.add_argument("--input", required=True, help="trace CSV file")
    g.add_argument("--kind", choices=("event", "poll"), default="event",
                   help="event log (node,location,start,end) or poll log (time,node,location)")
    g.add_argument("--policy", choices=("conservative", "relaxed"), default="conservative",
                   help="reconstruction policy for poll input")
    g.add_argument("--interval", type=duration, default=60, help="polling interval for poll input (default 60)")
    g.add_argument("--window", type=window_arg, default=None,
                   help="analysis window START:END in trace seconds (default: whole trace)")
    return p


def build_parser() -> argparse.ArgumentParser:
    common, trace = _common(), _trace_input()
    parser = argparse.ArgumentParser(
        prog="trace-lab",
        description="Wireless association trace analytics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help, parents=(common, trace)):
        return sub.add_parser(name, help=help, description=help, parents=list(parents))

    add("ingest", "validate a trace and write its canonical event form (trace.csv)")

    p = add("reconstruct", "rebuild an event trace from a poll log (trace.csv)", parents=(common,))
    p.add_argument("--input", required=True, help="poll trace CSV (time,node,location)")
    p.add_argument("--policy", choices=("conservative", "relaxed"), default="conservative")
    p.add_argument("--interval", type=duration, default=60, help="polling interval (default 60)")

    p = add("emulate-poll", "sample an event trace at fixed polling epochs (polls.csv)", parents=(common,))
    p.add_argument("--input", required=True, help="event trace CSV")
    p.add_argument("--interval", type=duration, default=60, help="polling interval (default 60)")

    p = add("user-metrics", "per-user online, session, coverage and handoff metrics")
    p.add_argument("--max-rank", type=int, default=10, help="prevalence ranks to report (default 10)")

    p = add("nsi", "network similarity index per time gap (nsi.csv)")
    _nsi_options(p)

    add("encounters", "pairwise encounters and per-pair aggregates")
    add("friendship", "directional friendship indexes and their asymmetry")

    p = add("ergraph", "encounter-relationship graph metrics over growing windows")
    p.add_argument("--windows", type=duration_list, default=None,
                   help="window lengths from trace start, e.g. 1d,7d,30d (default: 1,2,4,7,14 days and full)")

    p = add("friend-graph", "small-world metrics of graphs built from chosen friends")
    _friend_options(p)

    p = add("fit", "fit biPareto and/or exponential models to an x,prob CCDF table", parents=(common,))
    p.add_argument("--input", required=True, help="CCDF CSV with columns x,prob")
    p.add_argument("--dist", choices=("bipareto", "exponential", "both"), default="both")

    p = add("diffuse", "epidemic diffusion with selfish-node sweeps")
    _diffusion_options(p)

    p = add("synth", "generate a synthetic campus trace (trace.csv)", parents=(common,))
    d = CampusSpec()
    p.add_argument("--nodes", type=int, default=d.node_count)
    p.add_argument("--locations", type=int, default=d.location_count)
    p.add_argument("--days", type=int, default=d.days)
    p.add_argument("--step", type=int, default=d.step, help="time granularity in seconds")
    p.add_argument("--heavy-mix", type=float, default=d.heavy_mix, help="share of heavy users")
    p.add_argument("--home-preference", type=float, default=d.home_preference,
                   help="mean share of online time at the home location")
    p.add_argument("--jitter", type=int, default=d.jitter, help="max daily schedule shift in seconds")
    p.add_argument("--zipf", type=float, default=d.zipf_exponent, help="location popularity exponent")
    p.add_argument("--weekend-activity", type=float, default=d.weekend_activity,
                   help="chance a user shows up on a weekend day")

    p = add("report", "run every analysis stage over one trace")
    p.add_argument("--max-rank", type=int, default=10)
    _nsi_options(p)
    p.add_argument("--windows", type=duration_list, default=None, help="ER graph windows (see ergraph)")
    _friend_options(p)
    _diffusion_options(p)
    return parser


def _nsi_options(p):
    p.add_argument("--step", type=int, default=60, help="snapshot spacing in seconds (default 60)")
    p.add_argument("--gap-every", type=duration, default=3 * 3600, help="gap spacing (default 3h)")
    p.add_argument("--max-gap", type=duration, default=8 * DAY, help="largest gap (default 8d)")
    p.add_argument("--exclude-offline-pairs", action="store_true",
                   help="drop offline/offline snapshot pairs from the denominator")


def _friend_options(p):
    p.add_argument("--dimension", type=name_list(DIMENSIONS), default=list(DIMENSIONS),
                   help="friendship indexes to rank by (default t,c,l)")
    p.add_argument("--segment", type=name_list(SEGMENTS), default=list(SEGMENTS),
                   help="slices of the ranked list (default top,middle,bottom)")
    p.add_argument("--fraction", type=fraction_list, default=[0.2],
                   help="share of each node's partners to keep (default 0.2)")


def _diffusion_options(p):
    p.add_argument("--selfish", type=fraction_list, default=[0.0, 0.2, 0.4, 0.6, 0.8],
                   help="ascending selfish fractions (default 0,0.2,0.4,0.6,0.8)")
    p.add_argument("--diffusion-windows", type=duration_list, default=None,
                   help="window lengths from trace start (default 7d when shorter than the trace, and full)")
    p.add_argument("--source-fraction", type=float, default=0.30,
                   help="share of earliest nodes used as sources (default 0.3)")
    p.add_argument("--selfish-order", choices=SELFISH_ORDERS, default="unique")


# -- helpers ---------------------------------------------------------------

class Run:
    """Staging area and manifest bookkeeping for one command."""

    def __init__(self, args):
        self.args = args
        self.inputs: list[str] = []
        parent = os.path.dirname(os.path.abspath(args.out)) or "."
        os.makedirs(parent, exist_ok=True)
        if os.path.exists(args.out) and not os.path.isdir(args.out):
            raise UsageError(f"--out {args.out!r} exists and is not a directory")
        self.stage = tempfile.mkdtemp(prefix=".trace-lab-", dir=parent)

    def read(self, path):
        if not os.path.isfile(path):
            raise UsageError(f"input file not found: {path}")
        self.inputs.append(path)
        return path

    def finish(self):
        outputs = sorted(os.listdir(self.stage))
        config = {k: v for k, v in sorted(vars(self.args).items())
                  if k not in ("out", "threads", "config", "func")}
        manifest = {
            "tool": "trace-lab",
            "version": __version__,
            "command": self.args.command,
            "seed": self.args.seed,
            "config": config,
            "inputs": [{"path": p, "sha256": _io.sha256_file(p)} for p in self.inputs],
            "outputs": [{"file": f, "sha256": _io.sha256_file(os.path.join(self.stage, f))} for f in outputs],
        }
        with open(os.path.join(self.stage, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        out = self.args.out
        if os.path.isdir(out):
            for name in sorted(os.listdir(self.stage)):
                os.replace(os.path.join(self.stage, name), os.path.join(out, name))
            os.rmdir(self.stage)
        else:
            os.replace(self.stage, out)

    def abort(self):
        shutil.rmtree(self.stage, ignore_errors=True)

    def path(self, name):
        return os.path.join(self.stage, name)


def _load_records(run: Run, args):
    with open(run.read(args.input), encoding="utf-8") as fh:
        if getattr(args, "kind", "event") == "poll":
            samples = parse_poll_trace(fh)
            return reconstruct_from_polls(samples, PollingPolicy.named(args.policy, args.interval))
        return parse_event_trace(fh)


def _load_timelines(run: Run, args):
    timelines = build_timelines(_load_records(run, args))
    if not timelines:
        raise TraceError("trace holds no records")
    if args.window is not None:
        span = trace_span(timelines)
        lo, hi = args.window
        if lo < span.start or hi > span.end:
            raise InvalidInterval(f"window [{lo}, {hi}) lies outside the trace span [{span.start}, {span.end})")
        timelines = clip_timelines(timelines, Interval(lo, hi))
        if not timelines:
            raise TraceError("no node is online inside the window")
    return timelines


def _default_windows(span: Interval, days=(1, 2, 4, 7, 14)) -> list[int]:
    full = span.end - span.start
    return [d * DAY for d in days if d * DAY < full] + [full]


def _write_trace(path, records):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_event_trace(records, fh)


# -- stages ----------------------------------------------------------------

def _stage_user_metrics(run, args, timelines, sessions):
    locations = frozenset().union(*(tl.locations for tl in timelines.values()))
    rows = compute_user_metrics(sessions, locations)
    _io.user_metrics_csv(run.stage, rows)
    _io.prevalence_csv(run.stage, prevalence_curve(timelines, args.max_rank))
    for name, table in metric_ccdfs(rows).items():
        _io.ccdf_csv(run.stage, name, table)


def _stage_nsi(run, args, timelines):
    step = args.step
    if args.gap_every % step or args.max_gap % step:
        raise UsageError("--gap-every and --max-gap must be multiples of --step")
    gaps = default_gaps(step, args.max_gap, args.gap_every)
    curve = nsi(build_grids(timelines, step), gaps, not args.exclude_offline_pairs, args.threads)
    _io.nsi_csv(run.stage, curve)


def _stage_encounters(run, args, timelines, events):
    aggs, stats = aggregate_pairs(events, timelines)
    _io.encounters_csv(run.stage, events)
    _io.pair_aggregates_csv(run.stage, aggs)
    _io.encounter_stats_csv(run.stage, stats)
    s = list(stats.values())
    _io.ccdf_csv(run.stage, "total_encounters", ccdf([x.total_count for x in s]))
    _io.ccdf_csv(run.stage, "unique_encounters", ccdf([x.unique_count for x in s]))
    if events:
        _io.ccdf_csv(run.stage, "encounter_duration", ccdf([e.end - e.start for e in events]))
    return aggs


def _stage_friendship(run, args, timelines, sessions, events):
    accounting = {n: account(s) for n, s in sessions.items()}
    rows = friendship(events, accounting, sessions, {n: tl.locations for n, tl in timelines.items()})
    _io.friendship_csv(run.stage, rows)
    for dim in DIMENSIONS:
        if rows:
            _io.ccdf_csv(run.stage, f"frd_{dim}", ccdf([r.index(dim) for r in rows]))
    try:
        coeffs = friendship_asymmetry(rows)
    except DegenerateVariance:
        coeffs = None
    _io.asymmetry_csv(run.stage, coeffs)
    return rows


def _stage_ergraph(run, args, timelines, events):
    span = trace_span(timelines)
    windows = args.windows or _default_windows(span)
    metrics = evolve_metrics(timelines, windows, events, seed=args.seed)
    _io.ergraph_metrics_csv(run.stage, metrics)
    aggs, _ = aggregate_pairs(events, timelines)
    _io.edges_csv(run.stage, build_er_graph(aggs, timelines))


def _stage_friend_graph(run, args, timelines, rows):
    out = []
    for dim in args.dimension:
        for seg in args.segment:
            for f in args.fraction:
                g = build_friend_graph(rows, dim, seg, f, timelines)
                # directed graphs are charged the undirected regular reference's
                # path length for unreachable pairs; the column records it
                try:
                    raw, reg, _, norm, d = small_world(g, args.seed)
                    cc_norm, pl_norm, pl_disc = norm.cc_norm, norm.pl_norm, reg.pl_con
                except (InvalidDegree, DegenerateReference):
                    raw, d, pl_disc = average_path_length(g, 0.0), 0, 0.0
                    cc_norm = pl_norm = float("nan")
                out.append((dim, seg, float(f), g.n, g.mean_degree, raw.cc, raw.dr, raw.pl, cc_norm, pl_norm, d,
                            int(g.directed), pl_disc))
    _io.write_csv(run.path("friend_graph_metrics.csv"),
                  ("dimension", "segment", "fraction", "n", "mean_degree", "cc", "dr", "pl",
                   "cc_norm", "pl_norm", "reference_degree", "directed", "pl_disc"), out)


def _fit_entries(source, table, dists):
    entries = []
    for dist in dists:
        fitter = fit_bipareto if dist == "bipareto" else fit_exponential
        try:
            entries.append((source, dist, fitter(table), "ok"))
        except InsufficientPoints as exc:
            entries.append((source, dist, None, f"insufficient_points: {exc}"))
    return entries


def _stage_diffusion(run, args, timelines, events):
    span = trace_span(timelines)
    full = span.end - span.start
    windows = args.diffusion_windows or ([7 * DAY] if 7 * DAY < full else []) + [full]
    rows, summary = sweep_selfish(timelines, events, windows, args.selfish, args.source_fraction,
                                  args.selfish_order, args.seed, args.threads)
    _io.diffusion_csv(run.stage, rows, summary)


# -- commands --------------------------------------------------------------

def cmd_ingest(run, args):
    timelines = _load_timelines(run, args)
    _write_trace(run.path("trace.csv"), [r for n in sorted(timelines) for r in timelines[n].to_records()])


def cmd_reconstruct(run, args):
    with open(run.read(args.input), encoding="utf-8") as fh:
        samples = parse_poll_trace(fh)
    records = reconstruct_from_polls(samples, PollingPolicy.named(args.policy, args.interval))
    _write_trace(run.path("trace.csv"), records)


def cmd_emulate_poll(run, args):
    with open(run.read(args.input), encoding="utf-8") as fh:
        records = parse_event_trace(fh)
    build_timelines(records)
    with open(run.path("polls.csv"), "w", newline="", encoding="utf-8") as fh:
        write_poll_trace(emulate_polling(records, args.interval), fh)


def cmd_user_metrics(run, args):
    timelines = _load_timelines(run, args)
    _stage_user_metrics(run, args, timelines, sessions_by_node(timelines))


def cmd_nsi(run, args):
    _stage_nsi(run, args, _load_timelines(run, args))


def cmd_encounters(run, args):
    timelines = _load_timelines(run, args)
    _stage_encounters(run, args, timelines, extract_encounters(timelines, args.threads))


def cmd_friendship(run, args):
    timelines = _load_timelines(run, args)
    events = extract_encounters(timelines, args.threads)
    _stage_friendship(run, args, timelines, sessions_by_node(timelines), events)


def cmd_ergraph(run, args):
    timelines = _load_timelines(run, args)
    _stage_ergraph(run, args, timelines, extract_encounters(timelines, args.threads))


def cmd_friend_graph(run, args):
    timelines = _load_timelines(run, args)
    sessions = sessions_by_node(timelines)
    events = extract_encounters(timelines, args.threads)
    accounting = {n: account(s) for n, s in sessions.items()}
    rows = friendship(events, accounting, sessions, {n: tl.locations for n, tl in timelines.items()})
    _stage_friend_graph(run, args, timelines, rows)


def cmd_fit(run, args):
    table = _io.read_ccdf_csv(run.read(args.input))
    dists = ["bipareto", "exponential"] if args.dist == "both" else [args.dist]
    _io.fit_results_csv(run.stage, _fit_entries(os.path.basename(args.input), table, dists))


def cmd_diffuse(run, args):
    timelines = _load_timelines(run, args)
    _stage_diffusion(run, args, timelines, extract_encounters(timelines, args.threads))


def cmd_synth(run, args):
    spec = CampusSpec(
        node_count=args.nodes, location_count=args.locations, days=args.days, step=args.step,
        heavy_mix=args.heavy_mix, home_preference=args.home_preference, jitter=args.jitter,
        zipf_exponent=args.zipf, weekend_activity=args.weekend_activity, seed=args.seed,
    )
    _write_trace(run.path("trace.csv"), generate(spec))


def cmd_report(run, args):
    timelines = _load_timelines(run, args)
    sessions = sessions_by_node(timelines)
    _write_trace(run.path("trace.csv"), [r for n in sorted(timelines) for r in timelines[n].to_records()])
    _stage_user_metrics(run, args, timelines, sessions)
    _stage_nsi(run, args, timelines)
    events = extract_encounters(timelines, args.threads)
    _stage_encounters(run, args, timelines, events)
    rows = _stage_friendship(run, args, timelines, sessions, events)
    _stage_ergraph(run, args, timelines, events)
    _stage_friend_graph(run, args, timelines, rows)
    entries = []
    for name in ("total_encounters", "unique_encounters", "encounter_duration", "frd_t"):
        path = run.path(f"ccdf_{name}.csv")
        if os.path.exists(path):
            entries += _fit_entries(f"ccdf_{name}.csv", _io.read_ccdf_csv(path), ("bipareto", "exponential"))
    _io.fit_results_csv(run.stage, entries)
    _stage_diffusion(run, args, timelines, events)


COMMANDS = {
    "ingest": cmd_ingest,
    "reconstruct": cmd_reconstruct,
    "emulate-poll": cmd_emulate_poll,
    "user-metrics": cmd_user_metrics,
    "nsi": cmd_nsi,
    "encounters": cmd_encounters,
    "friendship": cmd_friendship,
    "ergraph": cmd_ergraph,
    "friend-graph": cmd_friend_graph,
    "fit": cmd_fit,
    "diffuse": cmd_diffuse,
    "synth": cmd_synth,
    "report": cmd_report,
}


def _apply_config(parser, argv):
    """Install a JSON ``--config`` as subcommand defaults, so explicit flags win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in COMMANDS), None)
    if known.config is None or command is None:
        return None
    try:
        with open(known.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read --config {known.config!r}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("--config must hold a JSON object")
    sub = parser._subparsers._group_actions[0].choices[command]
    actions = {a.dest: a for a in sub._actions}
    converted = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in actions or dest in ("help", "config"):
            raise UsageError(f"unknown config key {key!r} for {command}")
        action = actions[dest]
        if action.type is not None and value is not None and not isinstance(value, bool):
            try:
                value = action.type(value if isinstance(value, list) else str(value))
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from None
        converted[dest] = value
        action.required = False
    sub.set_defaults(**converted)
    return known.config


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        config_path = _apply_config(parser, argv)
    except UsageError as exc:
        print(f"trace-lab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    run_inputs = [config_path] if config_path else []
    run = None
    try:
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads must be at least 1")
        run = Run(args)
        for p in run_inputs:
            run.read(p)
        COMMANDS[args.command](run, args)
        run.finish()
        return EXIT_OK
    except UsageError as exc:
        code, msg = EXIT_USAGE, f"usage error: {exc}"
    except TraceError as exc:
        code, msg = EXIT_DATA, f"data error: {type(exc).__name__}: {exc}"
    except ValueError as exc:
        code, msg = EXIT_USAGE, f"invalid option: {exc}"
    except SystemExit as exc:
        code, msg = int(exc.code or 0), ""
    except Exception:
        code, msg = EXIT_INTERNAL, "internal error:\n" + traceback.format_exc()
    if run is not None:
        run.abort()
    if msg:
        print(f"trace-lab: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
