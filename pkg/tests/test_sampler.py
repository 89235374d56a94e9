"""Allocation arithmetic and stratified draw reproducibility."""

import numpy as np
import pytest

from quickcount_audit.census import CasillaRecord, Census, Contender
from quickcount_audit.errors import InfeasibleAllocation, UnknownCasillaId
from quickcount_audit.sampler import (
    Allocation,
    _allocate,
    draw,
    inclusion_probability,
    proportional_allocation,
    selected_indices,
)

from conftest import fuzz_census


def two_strata_census(lista_a, lista_b, k_a=4, k_b=4):
    contenders = (Contender("X", "X"), Contender("Y", "Y"))

    def mk(sid, k, lista_total):
        base, extra = divmod(lista_total, k)
        return tuple(
            CasillaRecord(
                f"{sid}-{i}", sid, base + (1 if i < extra else 0), {"X": 3, "Y": 2}
            )
            for i in range(k)
        )

    return Census(
        contenders=contenders, strata={"A": mk("A", k_a, lista_a), "B": mk("B", k_b, lista_b)}
    )


# ---------------------------------------------------------------------------
# proportional allocation
# ---------------------------------------------------------------------------

def test_allocation_tiny_exact(tiny):
    alloc = proportional_allocation(tiny, 5)
    assert alloc.per_stratum == {"A": 3, "B": 2}
    assert alloc.realized_total == 5


def test_allocation_tie_prefers_earlier_stratum():
    census = two_strata_census(500, 500)
    alloc = proportional_allocation(census, 5)
    assert alloc.per_stratum == {"A": 3, "B": 2}


def test_allocation_full_census(tiny):
    alloc = proportional_allocation(tiny, 7)
    assert alloc.per_stratum == tiny.casillas_by_stratum


def test_allocation_minimum_one_per_stratum():
    # stratum B holds almost no voters but still gets a casilla
    census = two_strata_census(10_000, 10, k_a=6, k_b=3)
    alloc = proportional_allocation(census, 4)
    assert alloc.per_stratum["B"] >= 1
    assert alloc.realized_total == 4


def test_allocation_infeasible(tiny):
    with pytest.raises(InfeasibleAllocation):
        proportional_allocation(tiny, 1)  # fewer than the 2 strata
    with pytest.raises(InfeasibleAllocation):
        proportional_allocation(tiny, 8)  # more than the 7 casillas


def test_allocation_conservation_fuzz():
    rng = np.random.default_rng(17)
    for _ in range(1000):
        n_strata = int(rng.integers(1, 12))
        sizes = {f"S{i:02d}": int(rng.integers(1, 40)) for i in range(n_strata)}
        weights = {s: int(rng.integers(1, 10_000)) for s in sizes}
        total = sum(sizes.values())
        c = int(rng.integers(n_strata, total + 1))
        out = _allocate(sizes, weights, c)
        assert sum(out.values()) == c
        assert all(1 <= out[s] <= sizes[s] for s in sizes)


# ---------------------------------------------------------------------------
# inclusion probabilities
# ---------------------------------------------------------------------------

def test_inclusion_probability(tiny):
    alloc = Allocation(target_total=3, per_stratum={"A": 2, "B": 1})
    assert inclusion_probability(alloc, tiny, "A-1") == 0.5
    assert inclusion_probability(alloc, tiny, "B-3") == pytest.approx(1 / 3)


def test_inclusion_probability_full(tiny):
    alloc = proportional_allocation(tiny, 7)
    for cid in tiny.stratum_of:
        assert inclusion_probability(alloc, tiny, cid) == 1.0


def test_inclusion_probability_unknown(tiny):
    alloc = proportional_allocation(tiny, 5)
    with pytest.raises(UnknownCasillaId):
        inclusion_probability(alloc, tiny, "nope")


# ---------------------------------------------------------------------------
# draws
# ---------------------------------------------------------------------------

def test_draw_deterministic(tiny):
    alloc = Allocation(3, {"A": 2, "B": 1})
    a = draw(tiny, alloc, seed=7, draw_index=0)
    b = draw(tiny, alloc, seed=7, draw_index=0)
    assert a == b
    c = draw(tiny, alloc, seed=7, draw_index=1)
    assert c.selected != a.selected or c.draw_index != a.draw_index


def test_draw_full_census_returns_everything(tiny):
    alloc = Allocation(7, {"A": 4, "B": 3})
    d = draw(tiny, alloc, seed=123, draw_index=0)
    assert sorted(d.selected["A"]) == [f"A-{i}" for i in range(1, 5)]
    assert sorted(d.selected["B"]) == [f"B-{i}" for i in range(1, 4)]


def test_draw_sizes_and_membership(tiny):
    alloc = Allocation(3, {"A": 2, "B": 1})
    for m in range(25):
        d = draw(tiny, alloc, seed=5, draw_index=m)
        for s, ids in d.selected.items():
            assert len(ids) == alloc.per_stratum[s]
            assert len(set(ids)) == len(ids)
            assert all(tiny.stratum_of[c] == s for c in ids)


def test_draw_matches_batched_indices(tiny):
    alloc = Allocation(3, {"A": 2, "B": 1})
    layout, sel = selected_indices(tiny, alloc, seed=99, start=0, count=8)
    ids = tiny.arrays.casilla_ids
    for m in range(8):
        d = draw(tiny, alloc, seed=99, draw_index=m)
        flat = []
        for i, s in enumerate(layout.stratum_ids):
            lo, hi = layout.offsets[i], layout.offsets[i + 1]
            flat.extend(ids[i][r] for r in sel[m, lo:hi])
        joined = [c for s in layout.stratum_ids for c in d.selected[s]]
        assert flat == joined


def test_batching_never_changes_selections(tiny):
    alloc = Allocation(3, {"A": 2, "B": 1})
    _, whole = selected_indices(tiny, alloc, seed=4, start=0, count=32)
    pieces = [selected_indices(tiny, alloc, seed=4, start=m0, count=8)[1] for m0 in range(0, 32, 8)]
    assert np.array_equal(whole, np.vstack(pieces))


def test_exchangeability_within_stratum(tiny):
    # every casilla must be selected with frequency c_i / K_i
    alloc = Allocation(3, {"A": 2, "B": 1})
    n = 100_000
    layout, sel = selected_indices(tiny, alloc, seed=2024, start=0, count=n)
    for i, s in enumerate(layout.stratum_ids):
        lo, hi = layout.offsets[i], layout.offsets[i + 1]
        k_i = int(layout.sizes[i])
        c_i = int(layout.counts[i])
        target = c_i / k_i
        freq = np.bincount(sel[:, lo:hi].ravel(), minlength=k_i) / n
        tol = 4 * np.sqrt(target * (1 - target) / n)
        assert np.all(np.abs(freq - target) < tol), (s, freq, target)
