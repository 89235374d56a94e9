"""Quantile convention, exact binomial, Shapiro-Wilk calibration, normal tail."""

import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from quickcount_audit.errors import (
    DomainError,
    EmptyInput,
    TooFewValues,
    TooManyValues,
    ZeroVariance,
)
from quickcount_audit.statskit import (
    binomial_pmf,
    binomial_tail_ge,
    empirical_quantile,
    normal_upper_tail,
    shapiro_wilk,
)


# ---------------------------------------------------------------------------
# quantiles
# ---------------------------------------------------------------------------

def test_quantile_on_integers():
    values = list(range(1, 101))
    assert empirical_quantile(values, 0.95) == 95
    assert empirical_quantile(values, 1.0) == 100
    assert empirical_quantile(values, 0.001) == 1


def test_quantile_singleton():
    for q in (0.01, 0.5, 0.95, 1.0):
        assert empirical_quantile([7.0], q) == 7.0


def test_quantile_is_an_input_element():
    rng = np.random.default_rng(0)
    values = rng.normal(size=317)
    for q in (0.1, 0.5, 0.9, 0.95):
        assert empirical_quantile(values, q) in values


def test_quantile_uniform_draws():
    rng = np.random.default_rng(42)
    values = rng.random(200_000)
    assert empirical_quantile(values, 0.95) == pytest.approx(0.95, abs=0.005)


def test_quantile_rank_float_fuzz():
    # 0.95 * 100000 overshoots 95000 in floating point; the rank must not
    values = np.arange(1, 100_001, dtype=float)
    assert empirical_quantile(values, 0.95) == 95_000.0


def test_quantile_errors():
    with pytest.raises(EmptyInput):
        empirical_quantile([], 0.5)
    with pytest.raises(DomainError):
        empirical_quantile([1.0], 0.0)
    with pytest.raises(DomainError):
        empirical_quantile([1.0], 1.5)


# ---------------------------------------------------------------------------
# binomial
# ---------------------------------------------------------------------------

def test_binomial_nine_intervals_exact():
    # oracle: exact rational arithmetic
    p0 = Fraction(19, 20) ** 9
    p1 = 9 * Fraction(1, 20) * Fraction(19, 20) ** 8
    assert binomial_pmf(9, 0.05, 0) == pytest.approx(float(p0), rel=1e-13)
    assert binomial_tail_ge(9, 0.05, 2) == pytest.approx(float(1 - p0 - p1), rel=1e-12)
    # the published rounding of those two numbers
    assert round(binomial_pmf(9, 0.05, 0), 2) == 0.63
    assert round(100 * binomial_tail_ge(9, 0.05, 2), 1) == 7.1


def test_binomial_degenerate_p():
    assert binomial_pmf(5, 0.0, 0) == 1.0
    assert binomial_tail_ge(5, 0.0, 1) == 0.0
    assert binomial_pmf(5, 1.0, 5) == 1.0


def test_binomial_sums_to_one_on_grid():
    for r in (1, 2, 9, 33, 64):
        for p100 in range(0, 101, 7):
            p = p100 / 100
            total = sum(binomial_pmf(r, p, x) for x in range(r + 1))
            assert abs(total - 1.0) < 1e-12
            assert binomial_tail_ge(r, p, 0) == pytest.approx(1.0, abs=1e-12)


def test_binomial_tail_monotone():
    tails = [binomial_tail_ge(9, 0.05, x) for x in range(10)]
    assert all(a >= b for a, b in zip(tails, tails[1:]))


def test_binomial_domain_errors():
    with pytest.raises(DomainError):
        binomial_pmf(9, 0.05, 10)
    with pytest.raises(DomainError):
        binomial_pmf(9, 1.05, 1)
    with pytest.raises(DomainError):
        binomial_tail_ge(9, 0.05, -1)


# ---------------------------------------------------------------------------
# Shapiro-Wilk
# ---------------------------------------------------------------------------

def test_shapiro_three_point_line():
    # (1,2,3) is perfectly linear in normal order statistics: W = 1
    w, p = shapiro_wilk([1.0, 2.0, 3.0])
    assert w == pytest.approx(1.0, abs=1e-9)
    assert w <= 1.0 + 1e-12


def test_shapiro_validation():
    with pytest.raises(TooFewValues):
        shapiro_wilk([1.0, 2.0])
    with pytest.raises(ZeroVariance):
        shapiro_wilk([3.0] * 10)
    with pytest.raises(TooManyValues):
        shapiro_wilk(np.zeros(5001))


def test_shapiro_null_rejection_rate_calibrated():
    # exact-normal samples: the alpha=5% rejection rate must sit near 5%
    rng = np.random.default_rng(314)
    trials = 2000
    rejections = sum(
        shapiro_wilk(rng.standard_normal(100))[1] < 0.05 for _ in range(trials)
    )
    assert 0.03 <= rejections / trials <= 0.07


def test_shapiro_rejects_heavy_tails():
    # normal/normal ratio has no variance; the test must almost always reject
    rng = np.random.default_rng(2718)
    trials = 500
    rejections = 0
    for _ in range(trials):
        sample = rng.standard_normal(100) / rng.standard_normal(100)
        rejections += shapiro_wilk(sample)[1] < 0.05
    assert rejections / trials > 0.5


def test_shapiro_w_monotone_in_normality():
    rng = np.random.default_rng(1)
    normal = rng.standard_normal(500)
    heavy = rng.standard_normal(500) / rng.standard_normal(500)
    assert shapiro_wilk(normal)[0] > shapiro_wilk(heavy)[0]


# ---------------------------------------------------------------------------
# normal upper tail
# ---------------------------------------------------------------------------

def mp_upper_tail(z):
    mpmath.mp.dps = 50
    return mpmath.erfc(z / mpmath.sqrt(2)) / 2


def test_tail_at_zero():
    assert normal_upper_tail(0.0) == 0.5


def test_tail_reference_values():
    for z in (1.0, 3.0, 5.0, 7.0, 7.3158, 9.0):
        ref = float(mp_upper_tail(z))
        assert normal_upper_tail(z) == pytest.approx(ref, rel=1e-3), z


def test_tail_beyond_seven_sigma():
    # the headline winner-gap z-score of about 7.32 standard deviations
    value = normal_upper_tail(2.78 / 0.38)
    assert 1.3e-13 / 3 < value < 1.3e-13 * 3
    assert value == pytest.approx(float(mp_upper_tail(2.78 / 0.38)), rel=1e-6)


def test_tail_reflection_identity():
    for z in np.linspace(0.0, 6.0, 61):
        assert normal_upper_tail(-z) == pytest.approx(
            1.0 - normal_upper_tail(z), abs=1e-12
        )


def test_tail_monotone():
    grid = np.arange(-10.0, 10.0 + 1e-9, 0.01)
    values = [normal_upper_tail(z) for z in grid]
    for a, b in zip(values, values[1:]):
        assert b <= a
    # strict decrease wherever float64 has room to express it
    for z_a, z_b, a, b in zip(grid, grid[1:], values, values[1:]):
        if a < 1.0 - 1e-12:
            assert b < a, (z_a, z_b)
