"""Ratio estimator exactness and interval semantics."""

from fractions import Fraction

import numpy as np
import pytest

from quickcount_audit.census import CasillaRecord, Census, Contender
from quickcount_audit.errors import EmptyStratumSample, MissingContender
from quickcount_audit.estimator import (
    IntervalSet,
    build_intervals,
    interval_hits,
    ratio_estimate,
)
from quickcount_audit.montecarlo import shares_from_sums, weighted_sums_matrix
from quickcount_audit.sampler import Allocation

from conftest import enumerate_tiny, fuzz_census


def census_votes(census, ids):
    return {cid: census.record_of[cid].votes for cid in ids}


def test_full_census_is_exact(tiny):
    est = ratio_estimate(tiny, census_votes(tiny, tiny.stratum_of))
    assert est.shares["X"] == float(Fraction(37, 70))
    assert est.shares["Y"] == float(Fraction(33, 70))
    assert est.participation == float(Fraction(70, 1000))
    assert est.sample_sizes == {"A": 4, "B": 3}


def test_full_census_exactness_fuzzed():
    rng = np.random.default_rng(23)
    for _ in range(50):
        census = fuzz_census(rng)
        est = ratio_estimate(census, census_votes(census, census.stratum_of))
        for cid, share in census.true_shares.items():
            assert est.shares[cid] == float(share)
        assert est.participation == float(census.participation_truth)


def test_partial_sample_hand_value(tiny):
    est = ratio_estimate(tiny, census_votes(tiny, ["A-1", "A-3", "B-2"]))
    assert est.shares["X"] == pytest.approx(41 / 70, abs=1e-15)
    assert est.sample_sizes == {"A": 2, "B": 1}


def test_shares_sum_to_one(tiny):
    rng = np.random.default_rng(3)
    for _ in range(50):
        census = fuzz_census(rng)
        ids = list(census.stratum_of)
        size = min(len(ids), max(1, len(ids) // 2))
        keep = set(rng.choice(len(ids), size=size, replace=False).tolist())
        # ensure every stratum keeps a casilla
        chosen = {ids[i] for i in keep}
        for s in census.stratum_ids:
            chosen.add(census.strata[s][0].casilla_id)
        est = ratio_estimate(census, census_votes(census, chosen))
        assert abs(sum(est.shares.values()) - 1.0) < 1e-12


def test_unsampled_stratum_is_an_error(tiny):
    with pytest.raises(EmptyStratumSample, match="B"):
        ratio_estimate(tiny, census_votes(tiny, ["A-1", "A-2"]))


def test_scale_invariance_under_weight_scaling(tiny):
    # replicating every casilla 4x scales each K_i by 4 and must leave the
    # estimate on the *same sampled casillas* bit-identical
    sample = ["A-1", "A-3", "B-2"]
    est = ratio_estimate(tiny, census_votes(tiny, sample))

    strata = {}
    for s, recs in tiny.strata.items():
        rows = list(recs)
        for copy in range(3):
            rows.extend(
                CasillaRecord(f"{r.casilla_id}*{copy}", s, r.lista_nominal, r.votes)
                for r in recs
            )
        strata[s] = tuple(rows)
    big = Census(contenders=tiny.contenders, strata=strata)
    est_big = ratio_estimate(big, census_votes(big, sample))
    for cid in tiny.contender_ids:
        assert est_big.shares[cid] == est.shares[cid]


def test_mean_estimate_matches_enumeration(tiny):
    # the ratio estimator is consistent, not unbiased; the oracle is the
    # exhaustive mean over the 18 possible samples, not the census share
    exact_mean = sum(e["X"] for e in enumerate_tiny(tiny)) / 18
    alloc = Allocation(3, {"A": 2, "B": 1})
    m = 100_000
    sums = weighted_sums_matrix(tiny, alloc, seed=31, replicates=m)
    shares, _ = shares_from_sums(sums)
    x = shares[:, tiny.contender_ids.index("X")]
    se = x.std(ddof=1) / np.sqrt(m)
    assert abs(x.mean() - float(exact_mean)) < 4 * se


# ---------------------------------------------------------------------------
# intervals
# ---------------------------------------------------------------------------

def test_build_intervals_basic(tiny):
    est = ratio_estimate(tiny, census_votes(tiny, tiny.stratum_of))
    ivs = build_intervals(est, {"X": 0.005, "Y": 0.005}, confidence=0.95)
    iv = ivs.intervals["X"]
    center = float(Fraction(37, 70))
    assert iv.lower == pytest.approx(center - 0.005)
    assert iv.upper == pytest.approx(center + 0.005)
    assert iv.upper - iv.lower == pytest.approx(0.01)
    assert ivs.confidence_level == 0.95


def test_build_intervals_clamps_to_unit():
    ivs = IntervalSet.from_centers({"a": 0.002, "b": 0.999}, {"a": 0.005, "b": 0.005})
    assert ivs.intervals["a"].lower == 0.0
    assert ivs.intervals["a"].upper == pytest.approx(0.007)
    assert ivs.intervals["b"].upper == 1.0
    assert ivs.intervals["a"].upper - ivs.intervals["a"].lower <= 2 * 0.005 + 1e-15


def test_build_intervals_missing_half_width(tiny):
    est = ratio_estimate(tiny, census_votes(tiny, tiny.stratum_of))
    with pytest.raises(MissingContender):
        build_intervals(est, {"X": 0.005})


def test_interval_hits_closed_endpoints():
    ivs = IntervalSet.from_bounds({"a": (0.2, 0.2)})
    hits, misses = interval_hits(ivs, {"a": 0.2})
    assert hits == {"a": True} and misses == 0


def test_interval_hits_published_2017_intervals():
    # the committee's published 95% intervals vs the district-computation
    # shares; the lead candidate and the null-vote category fall outside
    published = {
        "vazquez_mota": (10.99, 11.57),
        "del_mazo": (32.75, 33.59),
        "zepeda": (17.60, 18.28),
        "gonzalez": (1.03, 1.13),
        "gomez": (30.73, 31.53),
        "castell": (2.15, 2.27),
        "no_registrado": (0.08, 0.11),
        "nulo": (2.95, 3.29),
        "participation": (53.31, 54.15),
    }
    truth = {
        "vazquez_mota": 11.28,
        "del_mazo": 33.69,
        "zepeda": 17.89,
        "gonzalez": 1.08,
        "gomez": 30.91,
        "castell": 2.15,   # sits exactly on its lower bound: a hit
        "no_registrado": 0.11,
        "nulo": 2.89,
        "participation": 53.74,
    }
    ivs = IntervalSet.from_bounds(
        {k: (lo / 100, hi / 100) for k, (lo, hi) in published.items()}
    )
    hits, misses = interval_hits(ivs, {k: v / 100 for k, v in truth.items()})
    assert misses == 2
    assert {k for k, ok in hits.items() if not ok} == {"del_mazo", "nulo"}
    assert hits["castell"] is True


def test_interval_hits_full_interval_always_hits(tiny):
    ivs = IntervalSet.from_bounds({"X": (0.0, 1.0), "Y": (0.0, 1.0)})
    _, misses = interval_hits(ivs, {"X": 0.31, "Y": 0.0})
    assert misses == 0
