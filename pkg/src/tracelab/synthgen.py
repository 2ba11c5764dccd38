"""Seeded generator of campus-style association traces.

Each node has a Zipf-drawn home location and a fixed daily template: one
on-period split between home and a few secondary locations.  The template
is replayed every active day, shifted by a uniform jitter, so a zero jitter
repeats it exactly.  Weekend days are skipped with a configurable chance.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidSpec
from .trace_model import AssociationRecord

DAY = 86400
HOUR = 3600


@dataclass(frozen=True)
class CampusSpec:
    """Generator parameters.  All times are in seconds."""

    node_count: int = 1000
    location_count: int = 500
    days: int = 30
    step: int = 60
    heavy_mix: float = 0.3
    home_preference: float = 0.8
    preference_spread: float = 0.1
    jitter: int = 1800
    zipf_exponent: float = 1.0
    min_secondary: int = 1
    max_secondary: int = 3
    weekend_activity: float = 0.3
    seed: int = 0

    def __post_init__(self):
        for name in ("node_count", "location_count", "days", "step"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v <= 0:
                raise InvalidSpec(f"{name} must be a positive integer, got {v!r}")
        for name in ("heavy_mix", "home_preference", "weekend_activity"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidSpec(f"{name} must lie in [0, 1], got {v!r}")
        if not 0.0 <= self.preference_spread <= 0.5:
            raise InvalidSpec(f"preference_spread must lie in [0, 0.5], got {self.preference_spread!r}")
        if self.jitter < 0 or self.jitter >= 6 * HOUR:
            raise InvalidSpec(f"jitter must lie in [0, 6h), got {self.jitter!r}")
        if self.zipf_exponent < 0:
            raise InvalidSpec("zipf_exponent must be non-negative")
        if not 0 <= self.min_secondary <= self.max_secondary:
            raise InvalidSpec("need 0 <= min_secondary <= max_secondary")
        if DAY % self.step:
            raise InvalidSpec(f"step must divide a day, got {self.step}")

    def to_dict(self) -> dict:
        return asdict(self)


def _zipf_weights(n: int, exponent: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1, dtype=float) ** exponent
    return w / w.sum()


def _snap(x: float, step: int) -> int:
    return int(round(x / step)) * step


def _template(rng, spec: CampusSpec, heavy: bool, home: int, weights: np.ndarray):
    """Daily segments as (location index, offset from midnight, length)."""
    step = spec.step
    start = _snap(rng.uniform(7 * HOUR, 14 * HOUR), step)
    hours = rng.uniform(6, 10) if heavy else rng.uniform(0.5, 3)
    length = max(step, _snap(hours * HOUR, step))
    pref = rng.uniform(
        max(0.0, spec.home_preference - spec.preference_spread),
        min(1.0, spec.home_preference + spec.preference_spread),
    )
    n_sec = int(rng.integers(spec.min_secondary, spec.max_secondary + 1)) if spec.location_count > 1 else 0
    away = _snap((1.0 - pref) * length, step)
    if n_sec == 0 or away < step * n_sec:
        return [(home, start, length)]
    others = weights.copy()
    others[home] = 0.0
    others /= others.sum()
    secondary = rng.choice(spec.location_count, size=n_sec, p=others)
    per_visit = _snap(away / n_sec, step) or step
    home_len = length - per_visit * n_sec
    # Home block, secondary visits, home again.
    first = _snap(home_len / 2, step)
    segs, t = [], start
    if first:
        segs.append((home, t, first))
        t += first
    for loc in secondary:
        if segs and segs[-1][0] == loc:
            # repeated draw: extend the visit instead of emitting a split record
            segs[-1] = (segs[-1][0], segs[-1][1], segs[-1][2] + per_visit)
        else:
            segs.append((int(loc), t, per_visit))
        t += per_visit
    rest = start + length - t
    if rest > 0:
        segs.append((home, t, rest))
    return segs


def generate(spec: CampusSpec | None = None) -> list[AssociationRecord]:
    """Event records sorted by (node, start); deterministic in ``spec.seed``."""
    spec = spec or CampusSpec()
    rng = np.random.default_rng(spec.seed)
    weights = _zipf_weights(spec.location_count, spec.zipf_exponent)
    width = len(str(spec.node_count - 1))
    loc_width = len(str(spec.location_count - 1))
    loc_ids = [f"ap{i:0{loc_width}d}" for i in range(spec.location_count)]
    max_shift = spec.jitter // spec.step

    records: list[AssociationRecord] = []
    for i in range(spec.node_count):
        node = f"n{i:0{width}d}"
        heavy = bool(rng.random() < spec.heavy_mix)
        home = int(rng.choice(spec.location_count, p=weights))
        segs = _template(rng, spec, heavy, home, weights)
        shifts = rng.integers(-max_shift, max_shift + 1, size=spec.days) * spec.step
        active = rng.random(spec.days)
        for d in range(spec.days):
            if d % 7 >= 5 and active[d] >= spec.weekend_activity:
                continue
            base = d * DAY + int(shifts[d])
            for loc, off, length in segs:
                s = max(0, base + off)
                e = base + off + length
                if e > s:
                    records.append(AssociationRecord(node, loc_ids[loc], s, e))
    return records
