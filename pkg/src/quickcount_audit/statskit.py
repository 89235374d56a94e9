"""Small numerical statistics kit: order-statistic quantiles, exact binomial
probabilities, a Shapiro-Wilk wrapper, and a stable normal upper tail.

Only the four routines the audit needs live here, with the conventions the
rest of the package relies on pinned down:

* quantiles are always an element of the input (the ceil(q*M)-th order
  statistic, never interpolated), so calibrated half-widths can only err on
  the conservative side;
* the normal tail goes through the complementary error function, never
  ``1 - cdf``, so values like 1e-13 keep full relative accuracy.
"""

import math

import numpy as np
import scipy.stats

from .errors import (
    DomainError,
    EmptyInput,
    TooFewValues,
    TooManyValues,
    ZeroVariance,
)

SHAPIRO_MAX_N = 5000  # validity ceiling of the large-n W approximation


def quantile_rank(q: float, m: int) -> int:
    """1-based order-statistic rank ceil(q*m) of the q-quantile.

    A tiny relative guard compensates for decimal q values that are not
    exactly representable (0.95 * 100000 evaluates just above 95000).
    """
    if not 0.0 < q <= 1.0:
        raise DomainError(f"quantile level must be in (0, 1], got {q}")
    rank = math.ceil(q * m * (1.0 - 1e-12))
    return min(max(rank, 1), m)


def empirical_quantile(values, q: float) -> float:
    """q-quantile as the 1-based ceil(q*M)-th order statistic."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    m = arr.size
    if m == 0:
        raise EmptyInput("quantile of an empty sequence")
    rank = quantile_rank(q, m)
    return float(np.partition(arr, rank - 1)[rank - 1])


def binomial_pmf(r: int, p: float, x: int) -> float:
    """P(X = x) for X ~ Binomial(r, p), exact combinatorial evaluation."""
    if r < 0 or not 0 <= x <= r:
        raise DomainError(f"need 0 <= x <= r, got x={x}, r={r}")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"success probability must be in [0, 1], got {p}")
    # 0**0 = 1 by convention covers the degenerate p in {0, 1} cases
    return float(math.comb(r, x)) * p**x * (1.0 - p) ** (r - x)


def binomial_tail_ge(r: int, p: float, x: int) -> float:
    """P(X >= x) for X ~ Binomial(r, p), summed termwise (no cancellation)."""
    if r < 0 or not 0 <= x <= r:
        raise DomainError(f"need 0 <= x <= r, got x={x}, r={r}")
    return float(sum(binomial_pmf(r, p, k) for k in range(x, r + 1)))


def shapiro_wilk(values):
    """Shapiro-Wilk W and p-value for 3 <= n <= 5000.

    Thin validation wrapper over the standard large-n approximation of the W
    null distribution (polynomial coefficient fits, log-normal null), as
    implemented in scipy.  Constant samples are rejected up front because the
    statistic is undefined without spread.
    """
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size < 3:
        raise TooFewValues(f"Shapiro-Wilk needs n >= 3, got {arr.size}")
    if arr.size > SHAPIRO_MAX_N:
        raise TooManyValues(
            f"Shapiro-Wilk validated only up to n = {SHAPIRO_MAX_N}, got {arr.size}; "
            "subsample first"
        )
    if np.ptp(arr) == 0.0:
        raise ZeroVariance("Shapiro-Wilk undefined for a constant sample")
    w, p = scipy.stats.shapiro(arr)
    return float(w), float(p)


def normal_upper_tail(z: float) -> float:
    """P(Z > z) for standard normal Z, accurate deep into the tail."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))
