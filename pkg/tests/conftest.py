"""Shared fixtures: the TINY two-stratum census and the optional real dataset."""

import os
from pathlib import Path

import pytest

from quickcount_audit.census import (
    CasillaRecord,
    Census,
    Contender,
    load_census,
    load_contenders,
    load_half_widths,
    load_received,
)

# Real-dataset location: per-casilla district-computation CSV plus the
# election-night received CSV for the 2017 Estado de Mexico governor race
# (see README for the manual conversion of the published spreadsheets).
DATA_DIR = Path(
    os.environ.get(
        "QUICKCOUNT_AUDIT_DATA",
        Path(__file__).resolve().parent.parent / "data" / "ieem2017",
    )
)


def make_tiny() -> Census:
    """7 casillas in 2 strata; every estimate is enumerable by hand.

    Stratum A: lista 150 per casilla (600 total), votes (10,0),(8,2),(6,4),(4,6).
    Stratum B: lista 134,133,133 (400 total), votes (5,5),(3,7),(1,9).
    True share of X: 37/70.
    """
    contenders = (Contender("X", "Contender X"), Contender("Y", "Contender Y"))
    a_votes = [(10, 0), (8, 2), (6, 4), (4, 6)]
    b_votes = [(5, 5), (3, 7), (1, 9)]
    b_lista = [134, 133, 133]
    strata = {
        "A": tuple(
            CasillaRecord(f"A-{i+1}", "A", 150, {"X": x, "Y": y})
            for i, (x, y) in enumerate(a_votes)
        ),
        "B": tuple(
            CasillaRecord(f"B-{i+1}", "B", b_lista[i], {"X": x, "Y": y})
            for i, (x, y) in enumerate(b_votes)
        ),
    }
    return Census(contenders=contenders, strata=strata)


@pytest.fixture
def tiny() -> Census:
    return make_tiny()


def fuzz_census(rng, max_strata=4, max_casillas=5, max_contenders=4) -> Census:
    """Small random census with nonzero totals, for property tests."""
    n_strata = int(rng.integers(1, max_strata + 1))
    n_cont = int(rng.integers(2, max_contenders + 1))
    contenders = tuple(Contender(f"c{j}", f"C{j}") for j in range(n_cont))
    strata = {}
    for i in range(n_strata):
        sid = f"S{i:02d}"
        n_cas = int(rng.integers(1, max_casillas + 1))
        recs = []
        for k in range(n_cas):
            votes = {f"c{j}": int(rng.integers(0, 30)) for j in range(n_cont)}
            recs.append(
                CasillaRecord(f"{sid}-{k}", sid, int(rng.integers(50, 200)), votes)
            )
        strata[sid] = tuple(recs)
    census = Census(contenders=contenders, strata=strata)
    if census.votes_total == 0:  # re-roll the rare all-zero election
        return fuzz_census(rng, max_strata, max_casillas, max_contenders)
    return census


def enumerate_tiny(census) -> list:
    """Exact distribution over the 18 equiprobable samples of TINY under
    allocation (A: 2, B: 1): per sample, shares and participation as
    ``Fraction``.  Independent of the sampler/engine code path.
    """
    import itertools
    from fractions import Fraction

    a_recs = census.strata["A"]
    b_recs = census.strata["B"]
    out = []
    for pair in itertools.combinations(a_recs, 2):
        for single in itertools.combinations(b_recs, 1):
            num = {}
            for cid in census.contender_ids:
                sum_a = sum(r.votes[cid] for r in pair)
                sum_b = sum(r.votes[cid] for r in single)
                num[cid] = Fraction(4, 2) * sum_a + Fraction(3, 1) * sum_b
            den = sum(num.values())
            lista = Fraction(4, 2) * sum(r.lista_nominal for r in pair) + Fraction(
                3, 1
            ) * sum(r.lista_nominal for r in single)
            sample = {cid: num[cid] / den for cid in census.contender_ids}
            sample["participation"] = den / lista
            out.append(sample)
    return out


@pytest.fixture(scope="session")
def ieem():
    """The real 2017 dataset, when present; otherwise skip the test."""
    census_path = DATA_DIR / "census.csv"
    received_path = DATA_DIR / "received.csv"
    schema_path = DATA_DIR / "contenders.cfg"
    hw_path = DATA_DIR / "half_widths.cfg"
    if not (census_path.exists() and received_path.exists() and schema_path.exists()):
        pytest.skip(
            f"real dataset not present under {DATA_DIR} "
            "(set QUICKCOUNT_AUDIT_DATA; see README for the conversion steps)"
        )
    contenders = load_contenders(schema_path)
    census = load_census(census_path, contenders)
    received = load_received(received_path, census)
    half_widths = load_half_widths(hw_path, contenders) if hw_path.exists() else None
    return census, received, half_widths
