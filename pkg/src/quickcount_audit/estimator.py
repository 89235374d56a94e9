"""Ratio estimation of vote shares and fixed-half-width intervals.

The share estimator is the stratified ratio estimator used in Mexican quick
counts: with ``ybar_ij`` the mean votes of contender ``j`` over the sampled
casillas of stratum ``i`` (which holds ``K_i`` casillas in total),

    share_j = sum_i K_i * ybar_ij / sum_l sum_i K_i * ybar_il

Turnout is estimated with the same structure, dividing the stratum-weighted
mean total vote by the stratum-weighted mean lista nominal over the same
sampled casillas.  The committee's published half-widths (or simulated ones)
then give intervals ``center +/- half_width`` clamped to [0, 1].

Weighted sums are computed as ``(K_i / c_i) * integer sample sum`` so a
full-census sample reproduces the exact population shares: both numerator
and denominator are then exact integers in floating point and the final
division is correctly rounded.
"""

from dataclasses import dataclass

from .census import Census, PARTICIPATION_KEY
from .errors import EmptyStratumSample, MissingContender, UnknownCasillaId


@dataclass(frozen=True)
class VoteShareEstimate:
    """Point estimates from one sample: shares per contender plus turnout."""

    shares: dict  # contender id -> fraction in [0, 1]
    participation: float
    sample_sizes: dict  # stratum_id -> casillas used

    @property
    def total_sampled(self) -> int:
        return sum(self.sample_sizes.values())


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float
    center: float
    half_width: float


@dataclass(frozen=True)
class IntervalSet:
    """Per-contender confidence intervals at one confidence level."""

    intervals: dict  # contender id (or "participation") -> Interval
    confidence_level: float = 0.95

    @classmethod
    def from_centers(cls, centers: dict, half_widths: dict, confidence: float = 0.95):
        """Build ``center +/- half_width`` intervals, clamped to [0, 1]."""
        out = {}
        for key, center in centers.items():
            if key not in half_widths:
                raise MissingContender(f"no half-width for {key!r}")
            hw = float(half_widths[key])
            if hw <= 0:
                raise MissingContender(f"half-width for {key!r} must be positive")
            out[key] = Interval(
                lower=max(center - hw, 0.0),
                upper=min(center + hw, 1.0),
                center=float(center),
                half_width=hw,
            )
        return cls(intervals=out, confidence_level=float(confidence))

    @classmethod
    def from_bounds(cls, bounds: dict, confidence: float = 0.95):
        """Ingest externally reported intervals given as (lower, upper)."""
        out = {}
        for key, (lo, hi) in bounds.items():
            lo, hi = float(lo), float(hi)
            out[key] = Interval(
                lower=lo, upper=hi, center=(lo + hi) / 2.0, half_width=(hi - lo) / 2.0
            )
        return cls(intervals=out, confidence_level=float(confidence))


def ratio_estimate(census: Census, sample_votes: dict) -> VoteShareEstimate:
    """Stratified ratio estimate from ``casilla_id -> {contender: votes}``.

    The vote maps may carry election-night (received) values or the census's
    own values; lista nominal always comes from the census join.  Every
    census stratum must contribute at least one sampled casilla, otherwise
    the estimator is undefined and :class:`EmptyStratumSample` is raised.
    """
    cids = census.contender_ids
    by_stratum: dict = {s: [] for s in census.stratum_ids}
    for casilla_id, votes in sample_votes.items():
        stratum = census.stratum_of.get(casilla_id)
        if stratum is None:
            raise UnknownCasillaId(f"casilla {casilla_id!r} not in the census")
        by_stratum[stratum].append((casilla_id, votes))

    weighted = dict.fromkeys(cids, 0.0)  # sum_i K_i * ybar_ij
    weighted_lista = 0.0
    sample_sizes = {}
    for s in census.stratum_ids:
        picked = by_stratum[s]
        if not picked:
            raise EmptyStratumSample(f"stratum {s!r} has no sampled casillas")
        k_i = census.casillas_by_stratum[s]
        c_i = len(picked)
        sample_sizes[s] = c_i
        w = k_i / c_i
        lista_sum = 0
        sums = dict.fromkeys(cids, 0)
        for casilla_id, votes in picked:
            missing = [cid for cid in cids if cid not in votes]
            if missing:
                raise MissingContender(
                    f"casilla {casilla_id!r}: sample votes lack {missing}"
                )
            for cid in cids:
                sums[cid] += votes[cid]
            lista_sum += census.record_of[casilla_id].lista_nominal
        for cid in cids:
            weighted[cid] += w * sums[cid]
        weighted_lista += w * lista_sum

    denom = sum(weighted[cid] for cid in cids)
    if denom <= 0:
        raise EmptyStratumSample("sample contains zero votes overall")
    shares = {cid: weighted[cid] / denom for cid in cids}
    participation = denom / weighted_lista if weighted_lista > 0 else float("nan")
    return VoteShareEstimate(
        shares=shares, participation=participation, sample_sizes=sample_sizes
    )


def build_intervals(
    estimate: VoteShareEstimate, half_widths: dict, confidence: float = 0.95
) -> IntervalSet:
    """Intervals around an estimate's shares (plus turnout when supplied).

    ``half_widths`` maps contender ids to half-widths as fractions; an entry
    under ``"participation"`` adds the turnout interval.
    """
    centers = dict(estimate.shares)
    if PARTICIPATION_KEY in half_widths:
        centers[PARTICIPATION_KEY] = estimate.participation
    return IntervalSet.from_centers(centers, half_widths, confidence)


def interval_hits(intervals: IntervalSet, truth: dict) -> tuple:
    """Closed-interval hit test against true values.

    Returns ``(hits, misses)`` where ``hits[key]`` says whether
    ``lower <= truth[key] <= upper`` and ``misses`` counts the failures.
    """
    hits = {}
    for key, interval in intervals.intervals.items():
        if key not in truth:
            raise MissingContender(f"no truth supplied for {key!r}")
        t = float(truth[key])
        hits[key] = interval.lower <= t <= interval.upper
    return hits, sum(1 for ok in hits.values() if not ok)
