"""Capture-error diagnostics for the election-night sample.

Election-night transmission passes vote counts through several manual steps,
so the received numbers can differ from the district computation for the
same casillas.  This module quantifies those differences per contender:

* per-casilla difference series (received minus census) and the descriptive
  table of error percentages and mean vote difference per casilla;
* a sign-randomization test of the hypothesis that errors in favour and
  against occurred at random: magnitudes are kept, signs are redrawn
  uniformly from {-1, +1}, and the p-value is the probability of a mean at
  least as extreme as observed (observed included, so an all-zero series
  gets p = 1);
* corrected intervals: the committee's half-widths re-centered on the
  estimate computed from the census values of the very same sampled
  casillas, i.e. the intervals the committee would have published had the
  transmission been error free.

Sign-test statistics compare integer sums, never floating means, so ties
are decided exactly in both the exhaustive and the simulated mode.
"""

from dataclasses import dataclass

import numpy as np

from .census import Census, ReceivedSample, PARTICIPATION_KEY
from .errors import InvalidConfig, MissingHalfWidth
from .estimator import IntervalSet, interval_hits, ratio_estimate
from .sampler import raw_words, words_needed

EXHAUSTIVE_LIMIT = 20  # enumerate up to 2**20 sign vectors

SIGN_CONVENTION = "two-sided, |mean| >= |observed| (observed included)"


@dataclass(frozen=True)
class DiffSeries:
    """Per-casilla differences (received - census) for one contender."""

    contender_id: str
    d: tuple  # ints, casillas in ascending casilla_id order

    @property
    def n(self) -> int:
        return len(self.d)

    @property
    def zeros(self) -> int:
        return sum(1 for v in self.d if v == 0)

    @property
    def positives(self) -> int:
        return sum(1 for v in self.d if v > 0)

    @property
    def negatives(self) -> int:
        return sum(1 for v in self.d if v < 0)

    @property
    def mean(self) -> float:
        return sum(self.d) / len(self.d) if self.d else 0.0


def compute_differences(received: ReceivedSample, census: Census) -> dict:
    """Difference series per contender over the received casillas.

    Casillas are ordered by ascending casilla id so the series (and any
    seeded test on them) reproduce exactly.
    """
    order = sorted(received.casilla_ids)
    votes_by_id = received.votes_by_id
    out = {}
    for cid in census.contender_ids:
        diffs = tuple(
            votes_by_id[casilla_id][cid] - census.record_of[casilla_id].votes[cid]
            for casilla_id in order
        )
        out[cid] = DiffSeries(contender_id=cid, d=diffs)
    return out


# ---------------------------------------------------------------------------
# descriptive table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BiasRow:
    zeros: int
    positives: int
    negatives: int
    pct_zero: float
    pct_positive: float
    pct_negative: float
    mean_diff: float


@dataclass(frozen=True)
class BiasReport:
    n_casillas: int
    rows: dict  # contender id -> BiasRow


def bias_table(diffs: dict) -> BiasReport:
    """Percentages of casillas without error / in favour / against, per
    contender, plus the mean vote difference per casilla."""
    rows = {}
    n = 0
    for cid, series in diffs.items():
        n = series.n
        rows[cid] = BiasRow(
            zeros=series.zeros,
            positives=series.positives,
            negatives=series.negatives,
            pct_zero=100.0 * series.zeros / n if n else 100.0,
            pct_positive=100.0 * series.positives / n if n else 0.0,
            pct_negative=100.0 * series.negatives / n if n else 0.0,
            mean_diff=series.mean,
        )
    return BiasReport(n_casillas=n, rows=rows)


# ---------------------------------------------------------------------------
# sign-randomization test
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SignTestResult:
    contender_id: str
    p_value: float
    analytic_sd: float       # sqrt(sum (d_k / N)^2), the null sd of the mean
    mean_diff: float
    n: int
    n_nonzero: int
    mode: str                # "exhaustive" or "montecarlo"
    m_used: int              # sign vectors evaluated
    se: float                # Monte Carlo se of the p estimate (0 if exact)
    convention: str = SIGN_CONVENTION


def _exhaustive_count(magnitudes: np.ndarray, observed: int) -> tuple:
    """#sign vectors with |sum| >= observed, over all 2**n of them."""
    sums = np.zeros(1, dtype=np.int64)
    for v in magnitudes:
        sums = np.concatenate([sums - v, sums + v])
    return int(np.count_nonzero(np.abs(sums) >= observed)), sums.size


def _signed_sum_blocks(magnitudes: np.ndarray, replicates: int, seed: int, purpose: str):
    """Yield blocks of simulated sign-randomized sums (integer exact).

    Signs for replicate m come from the bits (lowest first) of its own
    counter-addressed word stream, so any batching gives the same values.
    """
    nz = magnitudes.size
    words_per_rep = words_needed(-(-max(nz, 1) // 64))
    mags = magnitudes.astype(np.int64)
    block = 8192
    for start in range(0, replicates, block):
        count = min(block, replicates - start)
        raw = raw_words(seed, purpose, words_per_rep, start, count)
        bits = np.unpackbits(
            raw.view(np.uint8).reshape(count, -1), axis=1, bitorder="little"
        )[:, :nz]
        # sum with signs s = 1 - 2*bit: total - 2 * (bits . mags)
        yield mags.sum() - 2 * (bits.astype(np.int64) @ mags)


def _montecarlo_count(
    magnitudes: np.ndarray, observed: int, replicates: int, seed: int, purpose: str
) -> int:
    """#simulated sign vectors with |sum| >= observed."""
    total = 0
    for signed in _signed_sum_blocks(magnitudes, replicates, seed, purpose):
        total += int(np.count_nonzero(np.abs(signed) >= observed))
    return total


def simulate_null_means(series: DiffSeries, replicates: int, seed: int = 0) -> np.ndarray:
    """Simulated mean differences under the random-signs hypothesis.

    Same stream the Monte Carlo p-value consumes; handy for checking the
    analytic null variance or plotting the null distribution.
    """
    d = np.asarray(series.d, dtype=np.int64)
    magnitudes = np.abs(d[d != 0])
    purpose = f"signs:{series.contender_id}"
    blocks = list(_signed_sum_blocks(magnitudes, replicates, seed, purpose))
    return np.concatenate(blocks) / series.n


def sign_test(
    series: DiffSeries,
    replicates: int = 100_000,
    seed: int = 0,
    mode: str = "auto",
) -> SignTestResult:
    """Randomize the signs of the observed differences and locate the mean.

    ``mode="auto"`` enumerates all sign vectors exactly when at most
    :data:`EXHAUSTIVE_LIMIT` differences are nonzero and simulates
    otherwise; ``"exhaustive"`` / ``"montecarlo"`` force one path.  The
    simulated p-value uses the add-one convention ``(1 + hits) / (M + 1)``
    so it can never be exactly zero.
    """
    d = np.asarray(series.d, dtype=np.int64)
    n = d.size
    observed = abs(int(d.sum()))  # N * |mean|, exact in integers
    magnitudes = np.abs(d[d != 0])
    nz = magnitudes.size
    analytic_sd = float(np.sqrt(np.sum((d / n) ** 2))) if n else 0.0

    if mode not in ("auto", "exhaustive", "montecarlo"):
        raise InvalidConfig(f"unknown sign-test mode {mode!r}")
    if mode == "exhaustive" and nz > EXHAUSTIVE_LIMIT:
        raise InvalidConfig(
            f"exhaustive mode caps at {EXHAUSTIVE_LIMIT} nonzero differences, got {nz}"
        )
    if mode == "auto":
        mode = "exhaustive" if nz <= EXHAUSTIVE_LIMIT else "montecarlo"

    if mode == "exhaustive":
        hits, combos = _exhaustive_count(magnitudes, observed)
        p = hits / combos
        se = 0.0
        m_used = combos
    else:
        if replicates < 10_000:
            raise InvalidConfig(
                f"sign test needs at least 10000 replicates, got {replicates}"
            )
        hits = _montecarlo_count(
            magnitudes, observed, replicates, seed, f"signs:{series.contender_id}"
        )
        p = (1 + hits) / (replicates + 1)
        se = float(np.sqrt(p * (1.0 - p) / replicates))
        m_used = replicates

    return SignTestResult(
        contender_id=series.contender_id,
        p_value=float(p),
        analytic_sd=analytic_sd,
        mean_diff=series.mean,
        n=n,
        n_nonzero=int(nz),
        mode=mode,
        m_used=int(m_used),
        se=se,
    )


# ---------------------------------------------------------------------------
# corrected intervals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorrectedIntervalRow:
    truth: float
    received_center: float
    received_lower: float
    received_upper: float
    received_hit: bool
    corrected_center: float
    corrected_lower: float
    corrected_upper: float
    corrected_hit: bool


@dataclass(frozen=True)
class CorrectedIntervalReport:
    confidence: float
    half_widths: dict
    rows: dict  # interval key -> CorrectedIntervalRow

    @property
    def all_corrected_hit(self) -> bool:
        return all(row.corrected_hit for row in self.rows.values())

    @property
    def received_misses(self) -> tuple:
        return tuple(k for k, row in self.rows.items() if not row.received_hit)


def corrected_intervals(
    received: ReceivedSample,
    census: Census,
    half_widths: dict,
    confidence: float = 0.95,
) -> CorrectedIntervalReport:
    """Intervals with and without capture errors, against census truths.

    The as-received side centers the committee's half-widths on the estimate
    computed from the transmitted votes; the corrected side re-centers them
    on the estimate computed from the census values of the same casillas.
    A ``participation`` half-width adds the turnout interval to both sides.
    """
    missing = [cid for cid in census.contender_ids if cid not in half_widths]
    if missing:
        raise MissingHalfWidth(f"no half-width for {missing}")

    received_votes = received.votes_by_id
    census_votes = {
        casilla_id: census.record_of[casilla_id].votes
        for casilla_id in received.casilla_ids
    }
    est_received = ratio_estimate(census, received_votes)
    est_corrected = ratio_estimate(census, census_votes)

    include_participation = PARTICIPATION_KEY in half_widths

    def centers(est):
        out = dict(est.shares)
        if include_participation:
            out[PARTICIPATION_KEY] = est.participation
        return out

    ivs_received = IntervalSet.from_centers(centers(est_received), half_widths, confidence)
    ivs_corrected = IntervalSet.from_centers(centers(est_corrected), half_widths, confidence)

    truths = dict(census.true_share_floats)
    if include_participation:
        truths[PARTICIPATION_KEY] = census.participation_truth_float
    hits_received, _ = interval_hits(ivs_received, truths)
    hits_corrected, _ = interval_hits(ivs_corrected, truths)

    rows = {}
    for key in ivs_received.intervals:
        a = ivs_received.intervals[key]
        b = ivs_corrected.intervals[key]
        rows[key] = CorrectedIntervalRow(
            truth=float(truths[key]),
            received_center=a.center,
            received_lower=a.lower,
            received_upper=a.upper,
            received_hit=hits_received[key],
            corrected_center=b.center,
            corrected_lower=b.lower,
            corrected_upper=b.upper,
            corrected_hit=hits_corrected[key],
        )
    return CorrectedIntervalReport(
        confidence=float(confidence),
        half_widths={k: float(v) for k, v in half_widths.items()},
        rows=rows,
    )
