"""biPareto and exponential models, least-squares fits to empirical CCDFs,
and the Kolmogorov-Smirnov D statistic."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._parallel import pmap
from ._validation import check_samples
from .errors import EmptyInput, InsufficientPoints, NegativeX, NonConvergence
from .user_metrics import CcdfTable, ccdf

GOLDEN = (math.sqrt(5) - 1) / 2

# log10 search bounds
ALPHA_BOUNDS = (-3.0, 0.0)
BETA_BOUNDS = (-2.0, 2.0)
C_BOUNDS = (0.0, 6.0)
LAMBDA_BOUNDS = (-3.0, 6.0)


class BiParetoParams(NamedTuple):
    alpha: float
    beta: float
    c: float
    k: float = 1.0


class ExponentialParams(NamedTuple):
    lam: float


@dataclass(frozen=True)
class FitResult:
    distribution: str
    params: BiParetoParams | ExponentialParams
    sse: float
    d_stat: float
    grid_sse: float
    sweeps: int


def bipareto_ccdf(x, p: BiParetoParams):
    """P(X > x): 1 up to ``k``, two power-law factors beyond it."""
    alpha, beta, c, k = p
    xa = np.asarray(x, dtype=float)
    out = np.ones_like(xa)
    m = xa > k
    xm = xa[m]
    out[m] = np.exp(-alpha * np.log(xm / k) + (alpha - beta) * np.log((xm + c) / (k + c)))
    return out if out.ndim else float(out)


def bipareto_cdf(x, p: BiParetoParams):
    return 1.0 - bipareto_ccdf(x, p)


def exponential_cdf(x, p: ExponentialParams):
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise NegativeX("exponential CDF is defined for x >= 0")
    out = -np.expm1(-p.lam * xa)
    return out if out.ndim else float(out)


def exponential_ccdf(x, p: ExponentialParams):
    xa = np.asarray(x, dtype=float)
    out = np.where(xa < 0, 1.0, np.exp(-p.lam * np.maximum(xa, 0.0)))
    return out if out.ndim else float(out)


def bipareto_sample(p: BiParetoParams, size: int, seed=None) -> np.ndarray:
    """Draw by numerically inverting the CCDF (bisection in log x)."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(size=size)
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    lo = np.full(size, math.log(p.k))
    hi = np.full(size, math.log(p.k) + 1.0)
    # grow the upper bracket until ccdf(hi) < u everywhere
    for _ in range(2000):
        bad = bipareto_ccdf(np.exp(hi), p) >= u
        if not bad.any():
            break
        hi[bad] = hi[bad] * 2 + 1
    for _ in range(200):
        mid = (lo + hi) / 2
        above = bipareto_ccdf(np.exp(mid), p) > u
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return np.exp((lo + hi) / 2)


def _as_table(data) -> CcdfTable:
    if isinstance(data, CcdfTable):
        if not data.points:
            raise EmptyInput("empty CCDF table")
        return data
    return ccdf(check_samples(data))


def ks_statistic(empirical, model_cdf: Callable) -> float:
    """sup |F_n - F_0| evaluated on both sides of every empirical jump.

    ``empirical`` is a sample array or a :class:`CcdfTable`.  Left limits of
    the model are taken one ulp below each jump so step-function models
    are handled exactly.
    """
    if isinstance(empirical, CcdfTable):
        table = _as_table(empirical)
        x, f_at = table.x, 1.0 - table.prob
    else:
        # exact counts rather than 1 - P(V > x), which can be off by an ulp
        arr = np.sort(check_samples(empirical))
        x, first = np.unique(arr, return_index=True)
        f_at = np.append(first[1:], arr.size) / arr.size
    f_before = np.concatenate(([0.0], f_at[:-1]))
    m_at = np.asarray(model_cdf(x), dtype=float)
    m_before = np.asarray(model_cdf(np.nextafter(x, -np.inf)), dtype=float)
    d = max(np.max(np.abs(f_at - m_at)), np.max(np.abs(f_before - m_before)))
    return float(min(max(d, 0.0), 1.0))


def _golden(f, lo, hi, tol=1e-9):
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _line_min(f, x, direction, fx, lo_b, hi_b, xtol):
    """Minimise ``f(x + t * direction)`` over the feasible t range: expand a
    bracket from t = 0 outwards, then golden-section inside it."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t_hi = np.where(direction > 0, (hi_b - x) / direction, np.where(direction < 0, (lo_b - x) / direction, np.inf))
        t_lo = np.where(direction > 0, (lo_b - x) / direction, np.where(direction < 0, (hi_b - x) / direction, -np.inf))
    t_min, t_max = float(np.max(t_lo)), float(np.min(t_hi))
    if t_max - t_min <= 0:
        return 0.0, fx

    def g(t):
        return f(x + t * direction)

    side = None
    for sign in (1.0, -1.0):
        t = min(max(sign, t_min), t_max)
        if t != 0.0 and g(t) < fx:
            side = sign
            break
    if side is None:
        # minimum within one unit of the current point
        t, ft = _golden(g, max(-1.0, t_min), min(1.0, t_max), xtol)
        return (t, ft) if ft < fx else (0.0, fx)
    a, b = 0.0, side
    fb = g(min(max(b, t_min), t_max))
    while True:
        c = b + (1 + GOLDEN) * (b - a)
        c_clip = min(max(c, t_min), t_max)
        fc = g(c_clip)
        if fc >= fb or c_clip != c:
            lo, hi = sorted((a, c_clip))
            break
        a, b, fb = b, c, fc
    t, ft = _golden(g, lo, hi, xtol)
    return (t, ft) if ft < fx else (0.0, fx)


def _direction_search(f, x0, f0, bounds, width, max_iter, ftol, xtol=1e-8):
    """Conjugate-direction search: golden-section line searches along the
    coordinate axes first, each sweep's net displacement then replaces the
    direction that contributed the largest decrease.  Stops once a sweep
    improves the objective by less than ``ftol`` (relative)."""
    x = np.array(x0, dtype=float)
    fx = f0
    lo_b = np.array([b[0] for b in bounds])
    hi_b = np.array([b[1] for b in bounds])
    dirs = [np.eye(x.size)[i] * width[i] for i in range(x.size)]
    for sweep in range(1, max_iter + 1):
        x_start, f_start = x.copy(), fx
        big_i, big_drop = 0, 0.0
        for i, d in enumerate(dirs):
            t, ft = _line_min(f, x, d, fx, lo_b, hi_b, xtol)
            if fx - ft > big_drop:
                big_i, big_drop = i, fx - ft
            if ft < fx:
                x, fx = np.clip(x + t * d, lo_b, hi_b), ft
        if f_start - fx <= ftol * abs(f_start):
            return list(x), fx, sweep
        step = x - x_start
        if x.size > 1 and np.any(step):
            t, ft = _line_min(f, x, step, fx, lo_b, hi_b, xtol)
            if ft < fx:
                x, fx = np.clip(x + t * step, lo_b, hi_b), ft
            dirs.pop(big_i)
            dirs.append(step)
    raise NonConvergence(f"direction search did not converge in {max_iter} sweeps")


def _prep(table: CcdfTable, min_points: int):
    x, p = table.x, table.prob
    if x.size < min_points:
        raise InsufficientPoints(f"need at least {min_points} distinct points, got {x.size}")
    return x, p


def fit_bipareto(
    empirical,
    k: float = 1.0,
    grid_shape=(12, 12, 16),
    n_starts: int = 3,
    max_iter: int = 500,
    tol: float = 1e-10,
    threads=None,
) -> FitResult:
    """Least-squares biPareto fit to an empirical CCDF.

    A log-spaced grid over (alpha, beta, c) seeds ``n_starts`` line-search
    refinements; the best refined point wins, ties broken by parameter order.
    """
    table = _as_table(empirical)
    x, p = _prep(table, 4)
    tail = x > k
    xt, pt = x[tail], p[tail]
    head_sse = float(np.sum((1.0 - p[~tail]) ** 2))
    lx = np.log(xt / k)

    def sse(theta):
        a, b, c = (10.0 ** v for v in theta)
        g = np.log((xt + c) / (k + c))
        model = np.exp(-a * lx + (a - b) * g)
        return float(np.sum((model - pt) ** 2)) + head_sse

    na, nb, nc = grid_shape
    la = np.linspace(*ALPHA_BOUNDS, na)
    lb = np.linspace(*BETA_BOUNDS, nb)
    lc = np.linspace(*C_BOUNDS, nc)
    alphas, betas = 10.0 ** la, 10.0 ** lb

    def grid_slice(ci):
        c = 10.0 ** lc[ci]
        g = np.log((xt + c) / (k + c))
        u = lx - g
        out = np.empty((na, nb))
        for ai, a in enumerate(alphas):
            au = a * u
            for bi, b in enumerate(betas):
                r = np.exp(-au - b * g) - pt
                out[ai, bi] = np.dot(r, r)
        return out

    grid = np.stack(pmap(grid_slice, range(nc), threads), axis=-1) + head_sse
    order = np.lexsort((np.arange(grid.size), grid.ravel()))
    starts = [np.unravel_index(i, grid.shape) for i in order[:n_starts]]
    grid_best = float(grid.ravel()[order[0]])

    steps = [(ALPHA_BOUNDS[1] - ALPHA_BOUNDS[0]) / (na - 1),
             (BETA_BOUNDS[1] - BETA_BOUNDS[0]) / (nb - 1),
             (C_BOUNDS[1] - C_BOUNDS[0]) / (nc - 1)]
    bounds = [ALPHA_BOUNDS, BETA_BOUNDS, C_BOUNDS]
    best = None
    for ai, bi, ci in starts:
        x0 = [la[ai], lb[bi], lc[ci]]
        theta, f, sweeps = _direction_search(sse, x0, float(grid[ai, bi, ci]), bounds, steps, max_iter, tol)
        key = (f, tuple(theta))
        if best is None or key < best[0]:
            best = (key, theta, sweeps)
    (f, _), theta, sweeps = best
    params = BiParetoParams(*(float(10.0 ** v) for v in theta), k=float(k))
    d = ks_statistic(table, lambda v: bipareto_cdf(v, params))
    return FitResult("bipareto", params, float(f), d, grid_best, sweeps)


def fit_exponential(empirical, n_grid: int = 91, max_iter: int = 500, tol: float = 1e-12) -> FitResult:
    """Least-squares fit of exp(-lambda x) to an empirical CCDF."""
    table = _as_table(empirical)
    x, p = _prep(table, 4)
    if np.any(x < 0):
        raise NegativeX("exponential fit needs non-negative data")

    def sse(theta):
        r = np.exp(-(10.0 ** theta[0]) * x) - p
        return float(np.dot(r, r))

    grid = np.linspace(*LAMBDA_BOUNDS, n_grid)
    values = np.array([sse([g]) for g in grid])
    i = int(np.argmin(values))
    step = (LAMBDA_BOUNDS[1] - LAMBDA_BOUNDS[0]) / (n_grid - 1)
    theta, f, sweeps = _direction_search(sse, [grid[i]], float(values[i]), [LAMBDA_BOUNDS], [step], max_iter, tol)
    params = ExponentialParams(float(10.0 ** theta[0]))
    d = ks_statistic(table, lambda v: exponential_cdf(np.maximum(v, 0.0), params))
    return FitResult("exponential", params, float(f), d, float(values[i]), sweeps)


class _FitBase(BaseEstimator):
    def score(self, X, y=None):
        """Negative D statistic of the fitted model against ``X``."""
        check_is_fitted(self, "result_")
        return -ks_statistic(_as_table(X), self.cdf)

    def predict(self, X):
        """Model CCDF at ``X``."""
        check_is_fitted(self, "result_")
        return self.ccdf(check_samples(X))

    def _store(self, result):
        self.result_ = result
        self.params_ = result.params
        self.sse_ = result.sse
        self.d_stat_ = result.d_stat
        return self


class BiParetoFit(_FitBase):
    """biPareto model fitted by least squares on the empirical CCDF.

    ``fit`` accepts raw samples or a :class:`CcdfTable`.
    """

    def __init__(self, k=1.0, grid_shape=(12, 12, 16), n_starts=3, max_iter=500, threads=None):
        self.k = k
        self.grid_shape = grid_shape
        self.n_starts = n_starts
        self.max_iter = max_iter
        self.threads = threads

    def fit(self, X, y=None):
        return self._store(fit_bipareto(X, self.k, self.grid_shape, self.n_starts, self.max_iter, threads=self.threads))

    def ccdf(self, x):
        return bipareto_ccdf(x, self.params_)

    def cdf(self, x):
        return bipareto_cdf(x, self.params_)


class ExponentialFit(_FitBase):
    def __init__(self, n_grid=91, max_iter=500):
        self.n_grid = n_grid
        self.max_iter = max_iter

    def fit(self, X, y=None):
        return self._store(fit_exponential(X, self.n_grid, self.max_iter))

    def ccdf(self, x):
        return exponential_ccdf(x, self.params_)

    def cdf(self, x):
        return exponential_cdf(np.maximum(x, 0.0), self.params_)
