"""Input validation helpers used by the estimator wrappers and the CLI."""
from __future__ import annotations

import numbers
import os

import numpy as np

from .errors import EmptyInput
from .trace_model import AssociationRecord, Timeline, build_timelines


def check_fraction(value, name, *, low_inclusive=True, high_inclusive=True):
    if not isinstance(value, numbers.Real) or np.isnan(value):
        raise ValueError(f"{name} must be a real number, got {value!r}")
    lo_ok = value >= 0 if low_inclusive else value > 0
    hi_ok = value <= 1 if high_inclusive else value < 1
    if not (lo_ok and hi_ok):
        lo = "[" if low_inclusive else "("
        hi = "]" if high_inclusive else ")"
        raise ValueError(f"{name} must lie in {lo}0, 1{hi}, got {value!r}")
    return float(value)


def check_positive(value, name, *, integer=False):
    kind = numbers.Integral if integer else numbers.Real
    if not isinstance(value, kind) or isinstance(value, bool) or value <= 0:
        raise ValueError(f"{name} must be a positive {'integer' if integer else 'number'}, got {value!r}")
    return value


def check_samples(x, name="X"):
    """Coerce to a finite 1-D float array (a column vector is flattened)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise EmptyInput(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite values")
    return arr


def check_timelines(X) -> dict[str, Timeline]:
    """Accept either a node -> Timeline mapping or an iterable of records."""
    if isinstance(X, dict):
        if not all(isinstance(v, Timeline) for v in X.values()):
            raise TypeError("expected a mapping of node id to Timeline")
        return X
    records = list(X)
    if records and not all(isinstance(r, AssociationRecord) for r in records):
        raise TypeError("expected Timeline mapping or AssociationRecord iterable")
    return build_timelines(records)


def resolve_threads(threads=None) -> int:
    """Worker cap: explicit value, else TRACE_LAB_THREADS, else 1."""
    if threads is None:
        env = os.environ.get("TRACE_LAB_THREADS")
        threads = int(env) if env else 1
    threads = int(threads)
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    return threads
