import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tracelab.errors import EmptyInput, InsufficientPoints, NegativeX, NonConvergence
from tracelab.statfit import (
    BiParetoFit,
    BiParetoParams,
    ExponentialFit,
    ExponentialParams,
    _direction_search,
    bipareto_ccdf,
    bipareto_cdf,
    bipareto_sample,
    exponential_ccdf,
    exponential_cdf,
    fit_bipareto,
    fit_exponential,
    ks_statistic,
)
from tracelab.user_metrics import CcdfTable, ccdf

KNEE550 = BiParetoParams(0.019, 0.83, 550.0)


def mp_ccdf(x, p):
    mpmath.mp.dps = 50
    x, a, b, c, k = (mpmath.mpf(repr(float(v))) for v in (x, p.alpha, p.beta, p.c, p.k))
    return (x / k) ** (-a) * ((x + c) / (k + c)) ** (a - b)


class TestBiParetoCcdf:
    def test_one_at_k(self):
        assert bipareto_ccdf(1.0, KNEE550) == 1.0
        assert bipareto_ccdf(0.3, KNEE550) == 1.0

    def test_usc_value_against_high_precision(self):
        expected = float(mpmath.mpf(10) ** mpmath.mpf("-0.019") * (mpmath.mpf(560) / 551) ** (mpmath.mpf("0.019") - mpmath.mpf("0.83")))
        assert bipareto_ccdf(10.0, KNEE550) == pytest.approx(expected, rel=1e-13)

    @given(st.floats(1.0001, 1e8), st.floats(1e-3, 1.0), st.floats(1e-2, 1e2), st.floats(1.0, 1e6))
    def test_matches_high_precision(self, x, a, b, c):
        p = BiParetoParams(a, b, c)
        assert bipareto_ccdf(x, p) == pytest.approx(float(mp_ccdf(x, p)), rel=1e-10, abs=1e-300)

    @given(st.floats(1e-3, 1.0), st.floats(1.0001, 1e6))
    def test_pure_pareto_when_slopes_equal(self, a, x):
        assert bipareto_ccdf(x, BiParetoParams(a, a, 123.0)) == pytest.approx(x ** -a, rel=1e-12)

    @given(st.floats(1e-3, 1.0), st.floats(1e-2, 1e2), st.floats(1.0, 1e6))
    def test_monotone_and_continuous(self, a, b, c):
        p = BiParetoParams(a, b, c)
        x = np.concatenate(([0.5, 1.0], np.logspace(0, 9, 2000)))
        v = bipareto_ccdf(np.sort(x), p)
        assert np.all(np.diff(v) <= 1e-15)
        assert bipareto_ccdf(1.0 + 1e-12, p) == pytest.approx(1.0, abs=1e-9)

    @staticmethod
    def _slope(p, x, h=1e-5):
        f = lambda t: math.log(bipareto_ccdf(t, p))
        return (f(x * (1 + h)) - f(x * (1 - h))) / (math.log1p(h) - math.log1p(-h))

    @given(st.floats(1e-3, 1.0), st.floats(1e-2, 1e2))
    def test_head_slope(self, a, b):
        # the head slope shows once c dwarfs beta * k
        p = BiParetoParams(a, b, 1e3 * (b + 1) * 10)
        assert abs(self._slope(p, 1.01) + a) < 1e-3

    @given(st.floats(1e-3, 1.0), st.floats(1e-2, 40.0))
    def test_tail_slope(self, a, b):
        # beta capped so the CCDF at 1e6 stays above the float underflow limit
        p = BiParetoParams(a, b, 0.5 / (b + 1))
        assert abs(self._slope(p, 1e6) + b) < 1e-3

    def test_cdf_complements(self):
        x = np.logspace(0, 5, 50)
        assert np.allclose(bipareto_cdf(x, KNEE550) + bipareto_ccdf(x, KNEE550), 1.0)


class TestExponential:
    def test_zero(self):
        assert exponential_cdf(0.0, ExponentialParams(5.0)) == 0.0

    def test_usc_value(self):
        assert exponential_cdf(0.01, ExponentialParams(305.3)) == pytest.approx(1 - math.exp(-3.053), rel=1e-14)

    def test_limit(self):
        assert exponential_cdf(10 / 305.3, ExponentialParams(305.3)) > 0.9999

    def test_negative(self):
        with pytest.raises(NegativeX):
            exponential_cdf(-1.0, ExponentialParams(1.0))

    def test_ccdf(self):
        assert exponential_ccdf(2.0, ExponentialParams(0.5)) == pytest.approx(math.exp(-1.0))


def ecdf(samples):
    s = np.sort(np.asarray(samples, dtype=float))
    return lambda x: np.searchsorted(s, x, side="right") / s.size


class TestKs:
    def test_single_sample_vs_uniform(self):
        assert ks_statistic([0.5], lambda x: np.clip(x, 0, 1)) == 0.5

    def test_self_comparison(self):
        assert ks_statistic([1, 2, 3], ecdf([1, 2, 3])) == 0.0
        rng = np.random.default_rng(1)
        s = rng.integers(0, 30, size=500)
        assert ks_statistic(s, ecdf(s)) == 0.0

    def test_model_equal_at_points(self):
        table = CcdfTable(((1.0, 0.5), (2.0, 0.0)))
        assert ks_statistic(table, lambda x: np.where(np.asarray(x) >= 2, 1.0, np.where(np.asarray(x) >= 1, 0.5, 0.0))) == 0.0

    def test_empty(self):
        with pytest.raises(EmptyInput):
            ks_statistic(CcdfTable(()), lambda x: x)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=40), st.randoms(use_true_random=False))
    def test_bounds_and_order_invariance(self, xs, rnd):
        f = lambda x: np.clip(x, 0, 1)
        d = ks_statistic(xs, f)
        ys = xs[:]
        rnd.shuffle(ys)
        assert 0 <= d <= 1
        assert ks_statistic(ys, f) == d

    def test_against_brute_force(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            s = rng.exponential(2.0, size=rng.integers(1, 60))
            f = lambda x: 1 - np.exp(-np.asarray(x) / 2.0)
            xs = np.sort(s)
            n = xs.size
            brute = max(max(abs((i + 1) / n - f(v)), abs(i / n - f(v))) for i, v in enumerate(xs)
                        if i + 1 == n or xs[i + 1] != v)
            assert ks_statistic(s, f) == pytest.approx(brute, abs=1e-12)


class TestFit:
    def test_bipareto_round_trip(self):
        true = BiParetoParams(0.05, 2.0, 100.0)
        res = fit_bipareto(bipareto_sample(true, 100_000, seed=0))
        assert abs(res.params.alpha / true.alpha - 1) <= 0.2
        assert res.d_stat < 0.02
        assert res.sse <= res.grid_sse

    def test_exponential_round_trip(self):
        rng = np.random.default_rng(0)
        res = fit_exponential(rng.exponential(1 / 400, size=20_000))
        assert abs(res.params.lam / 400 - 1) <= 0.05
        assert res.d_stat < 0.01
        assert res.sse <= res.grid_sse

    def test_constant_data(self):
        with pytest.raises(InsufficientPoints):
            fit_bipareto([3.0] * 50)
        with pytest.raises(InsufficientPoints):
            fit_exponential([3.0] * 50)

    def test_deterministic(self):
        s = bipareto_sample(KNEE550, 3000, seed=5)
        assert fit_bipareto(s) == fit_bipareto(s)
        assert fit_bipareto(s, threads=1) == fit_bipareto(s, threads=3)

    def test_sampler_matches_model(self):
        s = bipareto_sample(KNEE550, 50_000, seed=2)
        assert ks_statistic(s, lambda x: bipareto_cdf(x, KNEE550)) < 0.01

    def test_iteration_cap(self):
        f = lambda t: float((t[0] - 0.3) ** 2 + 10 * (t[1] - t[0] ** 2) ** 2)
        with pytest.raises(NonConvergence):
            _direction_search(f, [-1.0, 1.0], f([-1.0, 1.0]), [(-2, 2), (-2, 2)], [0.5, 0.5], 1, 0.0)


def test_estimators():
    rng = np.random.default_rng(3)
    data = rng.exponential(0.01, size=5000)
    est = ExponentialFit().fit(data)
    assert est.score(data) == -est.d_stat_
    assert est.predict([0.0]).tolist() == [1.0]
    table = ccdf(bipareto_sample(KNEE550, 5000, seed=1))
    bp = BiParetoFit(grid_shape=(6, 6, 8)).fit(table)
    assert bp.params_.k == 1.0 and 0 <= bp.d_stat_ <= 1
    assert set(bp.get_params()) == {"k", "grid_shape", "n_starts", "max_iter", "threads"}
