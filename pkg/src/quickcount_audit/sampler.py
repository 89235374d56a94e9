"""Proportional allocation and stratified SRSWOR with reproducible streams.

Randomness contract
-------------------
Every draw is a pure function of ``(census, allocation, seed, draw_index)``.
The derivation is counter based so that replicates can be computed in any
batch size, order, or worker partition and still come out bit-identical:

* A 128-bit Philox key is derived as ``blake2s(purpose, key=seed-bytes)``
  where ``purpose`` names the stream family (e.g. ``"srswor:c=1347"``).
* Replicate ``m`` owns the Philox counter blocks
  ``[m * blocks_per_replicate, (m + 1) * blocks_per_replicate)`` and nothing
  else, so its raw words never depend on which batch produced them.

Within each stratum the sample is a partial Fisher-Yates pass over the
stratum's casilla list in file order: swap target ``j`` is drawn uniformly
from ``[j, K_i)`` by reducing one 64-bit word modulo ``K_i - j`` (the modulo
bias is below 2**-45 for any realistic stratum and is ignored).  Strata are
processed in ascending stratum-id order.
"""

import hashlib
from dataclasses import dataclass

import numpy as np
from numpy.random import Philox

from .errors import InfeasibleAllocation, UnknownCasillaId
from .census import Census

_WORDS_PER_BLOCK = 4  # Philox4x64 emits four 64-bit words per counter block


def stream_key(seed: int, purpose: str) -> np.ndarray:
    """128-bit Philox key for one (seed, stream-family) pair."""
    if not 0 <= int(seed) < 2**64:
        raise ValueError("seed must fit in 64 unsigned bits")
    digest = hashlib.blake2s(
        purpose.encode(), key=int(seed).to_bytes(8, "little"), digest_size=16
    ).digest()
    return np.frombuffer(digest, dtype=np.uint64).copy()


def raw_words(seed: int, purpose: str, words_per_rep: int, start: int, count: int) -> np.ndarray:
    """Raw 64-bit words for replicates ``start .. start+count``, one row each.

    ``words_per_rep`` must be a multiple of 4 so replicates begin exactly on
    Philox counter blocks.
    """
    if words_per_rep % _WORDS_PER_BLOCK:
        raise ValueError("words_per_rep must be a multiple of 4")
    blocks_per_rep = words_per_rep // _WORDS_PER_BLOCK
    bg = Philox(key=stream_key(seed, purpose), counter=[start * blocks_per_rep, 0, 0, 0])
    flat = bg.random_raw(count * words_per_rep)
    return flat.reshape(count, words_per_rep)


def words_needed(n: int) -> int:
    """Round a per-replicate word budget up to whole Philox blocks."""
    return -(-max(n, 1) // _WORDS_PER_BLOCK) * _WORDS_PER_BLOCK


# ---------------------------------------------------------------------------
# allocation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Allocation:
    """Per-stratum sample sizes summing exactly to the requested total."""

    target_total: int
    per_stratum: dict  # stratum_id -> c_i

    @property
    def realized_total(self) -> int:
        return sum(self.per_stratum.values())


def _round_half_away(x: float) -> int:
    return int(np.floor(x + 0.5)) if x >= 0 else -int(np.floor(-x + 0.5))


def _allocate(sizes: dict, weights: dict, c: int) -> dict:
    """Core allocator over plain dicts (sizes: K_i, weights: n_i).

    Nearest-integer shares are clamped to [1, K_i], then nudged one unit at a
    time until they sum to ``c``: increments go to the largest positive
    residual ``(n_i/n)c - c_i``, decrements to the most negative.  Residual
    ties resolve in favour of earlier stratum ids keeping the larger share.
    """
    strata = sorted(sizes)
    n_strata = len(strata)
    total_k = sum(sizes.values())
    if c < n_strata or c > total_k:
        raise InfeasibleAllocation(
            f"sample size {c} not in [{n_strata} strata, {total_k} casillas]"
        )
    total_w = float(sum(weights.values()))
    raw = {s: weights[s] / total_w * c for s in strata}
    out = {s: min(max(_round_half_away(raw[s]), 1), sizes[s]) for s in strata}
    while True:
        diff = c - sum(out.values())
        if diff == 0:
            return out
        best = None
        if diff > 0:
            # strict > keeps the first (earliest id) among residual ties
            for s in strata:
                if out[s] < sizes[s]:
                    if best is None or raw[s] - out[s] > raw[best] - out[best]:
                        best = s
            out[best] += 1
        else:
            # <= keeps the last (latest id) among residual ties
            for s in strata:
                if out[s] > 1:
                    if best is None or raw[s] - out[s] <= raw[best] - out[best]:
                        best = s
            out[best] -= 1


def proportional_allocation(census: Census, c: int) -> Allocation:
    """Spread ``c`` casillas over strata proportionally to lista nominal."""
    per = _allocate(census.casillas_by_stratum, census.lista_by_stratum, int(c))
    return Allocation(target_total=int(c), per_stratum=per)


def inclusion_probability(allocation: Allocation, census: Census, casilla_id: str) -> float:
    """Selection probability c_i / K_i of one casilla under the allocation."""
    stratum = census.stratum_of.get(casilla_id)
    if stratum is None:
        raise UnknownCasillaId(f"casilla {casilla_id!r} not in the census")
    return allocation.per_stratum[stratum] / census.casillas_by_stratum[stratum]


# ---------------------------------------------------------------------------
# drawing
# ---------------------------------------------------------------------------

class _Layout:
    """Flattened per-stratum bounds for the swap-target word stream."""

    def __init__(self, census: Census, allocation: Allocation):
        arrays = census.arrays
        if set(allocation.per_stratum) != set(arrays.stratum_ids):
            raise InfeasibleAllocation("allocation strata do not match the census")
        self.stratum_ids = arrays.stratum_ids
        self.sizes = arrays.sizes
        self.counts = np.array(
            [allocation.per_stratum[s] for s in self.stratum_ids], dtype=np.int64
        )
        if np.any(self.counts < 1) or np.any(self.counts > self.sizes):
            raise InfeasibleAllocation("each stratum needs 1 <= c_i <= K_i")
        self.c_total = int(self.counts.sum())
        self.offsets = np.concatenate([[0], np.cumsum(self.counts)])
        self.lows = np.concatenate(
            [np.arange(c, dtype=np.uint64) for c in self.counts]
        )
        highs = np.concatenate(
            [np.full(c, k, dtype=np.uint64) for c, k in zip(self.counts, self.sizes)]
        )
        self.ranges = highs - self.lows
        self.words_per_rep = words_needed(self.c_total)
        self.purpose = f"srswor:c={allocation.target_total}"


def _swap_targets(layout: _Layout, seed: int, start: int, count: int) -> np.ndarray:
    """(count, c_total) matrix of Fisher-Yates swap targets, one row per draw."""
    raw = raw_words(seed, layout.purpose, layout.words_per_rep, start, count)
    return (layout.lows + raw[:, : layout.c_total] % layout.ranges).astype(np.int64)


def selected_indices(
    census: Census, allocation: Allocation, seed: int, start: int, count: int
) -> tuple:
    """Within-stratum row indices selected by draws ``start .. start+count``.

    Returns ``(layout, sel)`` where ``sel`` has shape ``(count, c_total)``;
    columns ``layout.offsets[i]:layout.offsets[i+1]`` hold stratum ``i``'s
    selection, as indices into the stratum's casilla list.
    """
    layout = _Layout(census, allocation)
    targets = _swap_targets(layout, seed, start, count)
    sel = np.empty((count, layout.c_total), dtype=np.int64)
    rows = np.arange(count)
    for i, k in enumerate(layout.sizes):
        lo, hi = layout.offsets[i], layout.offsets[i + 1]
        c_i = hi - lo
        idx = np.broadcast_to(np.arange(k, dtype=np.int64), (count, int(k))).copy()
        for j in range(c_i):
            r = targets[:, lo + j]
            tmp = idx[rows, r]
            idx[rows, r] = idx[:, j]
            idx[:, j] = tmp
        sel[:, lo:hi] = idx[:, :c_i]
    return layout, sel


@dataclass(frozen=True)
class SampleDraw:
    """One concrete stratified draw (casilla ids in selection order)."""

    allocation: Allocation
    selected: dict  # stratum_id -> tuple[casilla_id, ...]
    seed: int
    draw_index: int


def draw(census: Census, allocation: Allocation, seed: int, draw_index: int) -> SampleDraw:
    """The stratified SRSWOR draw numbered ``draw_index`` under ``seed``."""
    layout, sel = selected_indices(census, allocation, seed, draw_index, 1)
    picked = {}
    ids = census.arrays.casilla_ids
    for i, s in enumerate(layout.stratum_ids):
        lo, hi = layout.offsets[i], layout.offsets[i + 1]
        picked[s] = tuple(ids[i][r] for r in sel[0, lo:hi])
    return SampleDraw(
        allocation=allocation, selected=picked, seed=int(seed), draw_index=int(draw_index)
    )
