"""Monte Carlo studies over simulated quick-count samples.

Three studies share one engine.  For each replicate ``m`` the engine draws a
stratified sample (see :mod:`.sampler` for the reproducibility contract) and
accumulates the stratum-weighted vote sums ``(K_i / c_i) * sum of votes``
per contender plus the weighted lista-nominal column.  Everything else --
achievable precision, joint interval coverage, the winner-gap distribution --
is arithmetic on that ``(replicates, J + 1)`` matrix, so studies run at the
same sample size and seed can share draws.

Replicates are embarrassingly parallel: the matrix is computed in fixed-size
blocks whose rows depend only on ``(seed, draw_index)``, so any worker count
produces bit-identical reports.
"""

import multiprocessing
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from . import statskit
from .census import Census, PARTICIPATION_KEY
from .errors import InvalidConfig, MissingHalfWidth, UnknownContender
from .sampler import (
    Allocation,
    proportional_allocation,
    selected_indices,
    stream_key,
)

_BLOCK = 4096  # internal batch size; fixed so blocking never affects results

_FORK_STATE = None  # (census, allocation, seed) inherited by forked workers


def _block_sums(census: Census, allocation: Allocation, seed: int, start: int, count: int):
    """Weighted-sum rows for replicates ``start .. start+count``."""
    layout, sel = selected_indices(census, allocation, seed, start, count)
    mats = census.arrays.vote_mats
    out = np.zeros((count, census.n_contenders + 1), dtype=np.float64)
    for i, k in enumerate(layout.sizes):
        lo, hi = layout.offsets[i], layout.offsets[i + 1]
        c_i = int(hi - lo)
        picked = mats[i][sel[:, lo:hi]]  # (count, c_i, J+1)
        out += (float(k) / c_i) * picked.sum(axis=1)
    return out


def _fork_task(args):
    start, count = args
    census, allocation, seed = _FORK_STATE
    return start, _block_sums(census, allocation, seed, start, count)


def weighted_sums_matrix(
    census: Census,
    allocation: Allocation,
    seed: int,
    replicates: int,
    workers: int = 1,
) -> np.ndarray:
    """(replicates, J+1) stratum-weighted sums, one row per draw index."""
    global _FORK_STATE
    tasks = [
        (start, min(_BLOCK, replicates - start)) for start in range(0, replicates, _BLOCK)
    ]
    out = np.empty((replicates, census.n_contenders + 1), dtype=np.float64)
    use_pool = (
        workers > 1
        and len(tasks) > 1
        and "fork" in multiprocessing.get_all_start_methods()
    )
    if not use_pool:
        for start, count in tasks:
            out[start : start + count] = _block_sums(census, allocation, seed, start, count)
        return out
    _FORK_STATE = (census, allocation, seed)
    try:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(processes=workers) as pool:
            for start, rows in pool.imap_unordered(_fork_task, tasks):
                out[start : start + rows.shape[0]] = rows
    finally:
        _FORK_STATE = None
    return out


def shares_from_sums(sums: np.ndarray) -> tuple:
    """Split weighted sums into share matrix and participation vector."""
    votes = sums[:, :-1]
    totals = votes.sum(axis=1)
    shares = votes / totals[:, None]
    participation = totals / sums[:, -1]
    return shares, participation


def _study_sums(census, sample_size, seed, replicates, workers, sums):
    if replicates < 1000:
        raise InvalidConfig(f"need at least 1000 replicates, got {replicates}")
    allocation = proportional_allocation(census, sample_size)
    if sums is None:
        sums = weighted_sums_matrix(census, allocation, seed, replicates, workers)
    elif sums.shape != (replicates, census.n_contenders + 1):
        raise InvalidConfig("precomputed sums matrix has the wrong shape")
    return allocation, sums


def _quantile_with_se(sorted_abs_dev: np.ndarray, q: float) -> tuple:
    """Order-statistic quantile plus a rank-based standard error.

    The se comes from the distribution-free confidence interval for a
    quantile: ranks ``r +/- 1.96 * sqrt(q(1-q)M)`` bracket the estimate, and
    the bracket width is mapped back to the value scale.
    """
    m = sorted_abs_dev.size
    rank = statskit.quantile_rank(q, m)
    value = float(sorted_abs_dev[rank - 1])
    spread = 1.959963984540054 * np.sqrt(q * (1.0 - q) * m)
    lo = int(np.clip(np.floor(rank - spread), 1, m))
    hi = int(np.clip(np.ceil(rank + spread), 1, m))
    se = float((sorted_abs_dev[hi - 1] - sorted_abs_dev[lo - 1]) / (2 * 1.959963984540054))
    return value, se


# ---------------------------------------------------------------------------
# achievable precision
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PrecisionReport:
    """Achievable margins of error at one stratified sample size."""

    sample_size: int
    replicates: int
    quantile_level: float
    target_margin: float
    seed: int
    epsilons: dict          # contender id -> achievable half-width (fraction)
    std_errors: dict        # contender id -> Monte Carlo se of that quantile
    truths: dict            # contender id -> census share (fraction)
    meets_target: dict      # contender id -> epsilon <= target
    participation_epsilon: float
    participation_se: float
    participation_truth: float

    @property
    def all_meet(self) -> bool:
        return all(self.meets_target.values())

    def half_widths(self, include_participation: bool = True) -> dict:
        out = dict(self.epsilons)
        if include_participation:
            out[PARTICIPATION_KEY] = self.participation_epsilon
        return out


def precision_study(
    census: Census,
    sample_size: int,
    replicates: int = 100_000,
    target_margin: float = 0.005,
    quantile_level: float = 0.95,
    seed: int = 0,
    workers: int = 1,
    sums: np.ndarray | None = None,
) -> PrecisionReport:
    """Margin of error achievable with stratified samples of a given size.

    For every contender the study simulates ``replicates`` stratified draws,
    re-estimates the share each time, and reports the ``quantile_level``
    quantile of the absolute estimation errors.  A contender meets the
    target when that quantile is at most ``target_margin``.
    """
    if not 0.0 < quantile_level <= 1.0:
        raise InvalidConfig("quantile_level must be in (0, 1]")
    _, sums = _study_sums(census, sample_size, seed, replicates, workers, sums)
    shares, participation = shares_from_sums(sums)

    epsilons, std_errors, meets = {}, {}, {}
    truths = census.true_share_floats
    for j, cid in enumerate(census.contender_ids):
        dev = np.sort(np.abs(shares[:, j] - truths[cid]))
        eps, se = _quantile_with_se(dev, quantile_level)
        epsilons[cid] = eps
        std_errors[cid] = se
        meets[cid] = eps <= target_margin
    part_dev = np.sort(np.abs(participation - census.participation_truth_float))
    part_eps, part_se = _quantile_with_se(part_dev, quantile_level)

    return PrecisionReport(
        sample_size=int(sample_size),
        replicates=int(replicates),
        quantile_level=float(quantile_level),
        target_margin=float(target_margin),
        seed=int(seed),
        epsilons=epsilons,
        std_errors=std_errors,
        truths=dict(truths),
        meets_target=meets,
        participation_epsilon=part_eps,
        participation_se=part_se,
        participation_truth=census.participation_truth_float,
    )


# ---------------------------------------------------------------------------
# joint interval coverage
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoverageReport:
    """Distribution of the number of intervals that miss the census truth."""

    sample_size: int
    replicates: int
    confidence: float
    seed: int
    include_participation: bool
    half_widths: dict        # interval key -> half-width used (fraction)
    truths: dict             # interval key -> true value
    miss_histogram: tuple    # P(X = k) for k = 0 .. number of intervals
    p_zero_miss: float
    p_ge1_miss: float
    p_ge2_miss: float
    se_zero_miss: float
    se_ge1_miss: float
    se_ge2_miss: float
    marginal_hit_rates: dict
    binomial_r: int
    binomial_p: float
    binomial_zero: float
    binomial_ge1: float
    binomial_ge2: float


def coverage_study(
    census: Census,
    sample_size: int,
    half_widths: dict,
    replicates: int = 100_000,
    seed: int = 0,
    confidence: float = 0.95,
    include_participation: bool = True,
    workers: int = 1,
    sums: np.ndarray | None = None,
) -> CoverageReport:
    """Joint coverage of fixed-half-width intervals over simulated draws.

    Per replicate, an interval ``estimate +/- half_width`` is built for every
    contender (plus turnout unless disabled) and ``X`` counts how many fail
    to contain the census value.  The distribution of ``X`` is reported next
    to the independence approximation Binomial(#intervals, 1 - confidence).
    """
    if not 0.0 < confidence < 1.0:
        raise InvalidConfig(
            f"confidence must be strictly inside (0, 1), got {confidence}; "
            "a 100% level forces the useless [0, 1] interval"
        )
    _, sums = _study_sums(census, sample_size, seed, replicates, workers, sums)
    shares, participation = shares_from_sums(sums)

    keys = list(census.contender_ids)
    if include_participation:
        keys.append(PARTICIPATION_KEY)
    missing = [key for key in keys if key not in half_widths]
    if missing:
        raise MissingHalfWidth(f"no half-width for {missing}")

    truths = dict(census.true_share_floats)
    estimates = shares
    if include_participation:
        truths[PARTICIPATION_KEY] = census.participation_truth_float
        estimates = np.column_stack([shares, participation])

    hw = np.array([float(half_widths[key]) for key in keys])
    truth_vec = np.array([truths[key] for key in keys])
    miss = np.abs(estimates - truth_vec) > hw  # hit is the closed interval
    x = miss.sum(axis=1)

    r = len(keys)
    hist = np.bincount(x, minlength=r + 1) / replicates
    p0 = float(hist[0])
    p1 = float(1.0 - hist[0])
    p2 = float(1.0 - hist[0] - hist[1])

    def se(p):
        return float(np.sqrt(p * (1.0 - p) / replicates))

    marginal = {
        key: float(1.0 - miss[:, i].mean()) for i, key in enumerate(keys)
    }
    q = 1.0 - confidence
    return CoverageReport(
        sample_size=int(sample_size),
        replicates=int(replicates),
        confidence=float(confidence),
        seed=int(seed),
        include_participation=bool(include_participation),
        half_widths={key: float(half_widths[key]) for key in keys},
        truths={key: float(truths[key]) for key in keys},
        miss_histogram=tuple(float(v) for v in hist),
        p_zero_miss=p0,
        p_ge1_miss=p1,
        p_ge2_miss=p2,
        se_zero_miss=se(p0),
        se_ge1_miss=se(p1),
        se_ge2_miss=se(p2),
        marginal_hit_rates=marginal,
        binomial_r=r,
        binomial_p=q,
        binomial_zero=statskit.binomial_pmf(r, q, 0),
        binomial_ge1=statskit.binomial_tail_ge(r, q, 1),
        binomial_ge2=statskit.binomial_tail_ge(r, q, 2),
    )


# ---------------------------------------------------------------------------
# winner gap
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WinnerGapReport:
    """Sampling distribution of the share gap between two contenders."""

    leader: str
    runner_up: str
    sample_size: int
    replicates: int
    seed: int
    mean_diff: float
    sd_diff: float
    se_mean: float
    histogram_edges: tuple
    histogram_counts: tuple
    shapiro_w: float | None
    shapiro_p: float | None
    shapiro_n: int | None
    normal_tail_prob: float | None   # P(gap < 0) under the fitted normal
    empirical_neg_frac: float
    degenerate: bool


def winner_gap_study(
    census: Census,
    leader_id: str,
    runner_up_id: str,
    sample_size: int,
    replicates: int = 100_000,
    seed: int = 0,
    histogram_bins: int = 60,
    workers: int = 1,
    sums: np.ndarray | None = None,
) -> WinnerGapReport:
    """Simulate the distribution of ``share(leader) - share(runner_up)``.

    A normal distribution is fitted to the simulated gaps (its plausibility
    checked with Shapiro-Wilk on a seeded subsample of at most 5000 values)
    and the probability of a sign reversal is evaluated from the fitted
    tail, next to the raw fraction of negative simulated gaps.
    """
    cids = census.contender_ids
    for cid in (leader_id, runner_up_id):
        if cid not in cids:
            raise UnknownContender(f"contender {cid!r} not in the census")
    if leader_id == runner_up_id:
        raise InvalidConfig("leader and runner-up must differ")
    _, sums = _study_sums(census, sample_size, seed, replicates, workers, sums)
    shares, _ = shares_from_sums(sums)
    diffs = shares[:, cids.index(leader_id)] - shares[:, cids.index(runner_up_id)]

    mean = float(np.mean(diffs))
    sd = float(np.std(diffs, ddof=1))
    degenerate = sd < 1e-12

    # histogram spans mean +/- 5 sd; clip so every replicate lands in a bin
    half_span = max(5.0 * sd, 1e-9)
    edges = np.linspace(mean - half_span, mean + half_span, histogram_bins + 1)
    counts, _ = np.histogram(np.clip(diffs, edges[0], edges[-1]), bins=edges)

    shapiro_w = shapiro_p = shapiro_n = tail = None
    if not degenerate:
        n_sub = min(replicates, statskit.SHAPIRO_MAX_N)
        if replicates > n_sub:
            rng = Generator(Philox(key=stream_key(seed, f"shapiro:{leader_id}:{runner_up_id}")))
            subsample = diffs[rng.choice(replicates, size=n_sub, replace=False)]
        else:
            subsample = diffs
        shapiro_w, shapiro_p = statskit.shapiro_wilk(subsample)
        shapiro_n = int(n_sub)
        tail = statskit.normal_upper_tail(mean / sd)

    return WinnerGapReport(
        leader=str(leader_id),
        runner_up=str(runner_up_id),
        sample_size=int(sample_size),
        replicates=int(replicates),
        seed=int(seed),
        mean_diff=mean,
        sd_diff=sd,
        se_mean=sd / float(np.sqrt(replicates)),
        histogram_edges=tuple(float(e) for e in edges),
        histogram_counts=tuple(int(c) for c in counts),
        shapiro_w=shapiro_w,
        shapiro_p=shapiro_p,
        shapiro_n=shapiro_n,
        normal_tail_prob=tail,
        empirical_neg_frac=float(np.mean(diffs < 0)),
        degenerate=degenerate,
    )
