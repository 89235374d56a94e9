"""Election population model and quick-count data ingestion.

The central objects are:

* ``Census`` -- the full per-casilla district-computation count, partitioned
  into strata.  This is the ground truth a quick count tries to estimate.
* ``ReceivedSample`` -- the per-casilla rows the counting committee received
  on election night, possibly corrupted by capture errors.

Vote counts stay integers all the way through ingestion; shares only become
floating point inside the estimators, so population truths remain exact for
oracle-style tests.

File formats (UTF-8, comma separated, header row required):

* census.csv:   ``casilla_id,stratum_id,lista_nominal,<one column per contender id>``
* received.csv: ``casilla_id,stratum_id,<one column per contender id>``

The contender schema lives in a small key-value config file, one contender
per line, in report order::

    # id = kind, display label          (kind: candidate | unregistered | null_vote)
    delmazo = candidate, Alfredo del Mazo
    nulo    = null_vote, Voto nulo

Blank lines and ``#`` comments are ignored.
"""

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateCasillaId,
    EmptyStratum,
    InvalidSpec,
    MalformedRow,
    MissingColumn,
    NegativeCount,
    SchemaError,
    StratumMismatch,
    UnknownCasillaId,
)

CONTENDER_KINDS = ("candidate", "unregistered", "null_vote")

#: reserved for the turnout interval in half-width maps and coverage reports
PARTICIPATION_KEY = "participation"


@dataclass(frozen=True)
class Contender:
    id: str
    label: str
    kind: str = "candidate"

    def __post_init__(self):
        if self.kind not in CONTENDER_KINDS:
            raise SchemaError(f"contender {self.id!r}: unknown kind {self.kind!r}")
        if self.id == PARTICIPATION_KEY:
            raise SchemaError(f"contender id {PARTICIPATION_KEY!r} is reserved")


@dataclass(frozen=True)
class CasillaRecord:
    casilla_id: str
    stratum_id: str
    lista_nominal: int
    votes: dict  # contender id -> non-negative vote count

    def total_votes(self) -> int:
        return sum(self.votes.values())


@dataclass(frozen=True)
class ReceivedRow:
    casilla_id: str
    stratum_id: str
    votes: dict


class _Arrays:
    """Numeric views of a census for the simulation engine.

    Strata are ordered by ascending stratum id; casillas keep file order
    within their stratum.  ``vote_mats[i]`` has one row per casilla and one
    column per contender plus a final lista-nominal column.
    """

    def __init__(self, census: "Census"):
        self.stratum_ids = tuple(sorted(census.strata))
        self.sizes = np.array(
            [len(census.strata[s]) for s in self.stratum_ids], dtype=np.int64
        )
        cids = census.contender_ids
        self.vote_mats = []
        self.casilla_ids = []
        for s in self.stratum_ids:
            recs = census.strata[s]
            mat = np.empty((len(recs), len(cids) + 1), dtype=np.float64)
            for r, rec in enumerate(recs):
                for j, cid in enumerate(cids):
                    mat[r, j] = rec.votes[cid]
                mat[r, len(cids)] = rec.lista_nominal
            self.vote_mats.append(mat)
            self.casilla_ids.append(tuple(rec.casilla_id for rec in recs))


@dataclass(frozen=True)
class Census:
    """District-computation population: contenders plus strata of casillas."""

    contenders: tuple
    strata: dict  # stratum_id -> tuple[CasillaRecord, ...] in file order

    def __post_init__(self):
        ids = [c.id for c in self.contenders]
        if len(ids) < 2:
            raise InvalidSpec("an election needs at least 2 contenders")
        if len(set(ids)) != len(ids):
            raise SchemaError("contender ids must be unique")
        seen = set()
        for s, recs in self.strata.items():
            for rec in recs:
                if rec.casilla_id in seen:
                    raise DuplicateCasillaId(
                        f"casilla id {rec.casilla_id!r} appears more than once"
                    )
                seen.add(rec.casilla_id)
                missing = [cid for cid in ids if cid not in rec.votes]
                if missing:
                    raise MissingColumn(
                        f"casilla {rec.casilla_id!r} lacks counts for {missing}"
                    )

    # -- basic aggregates -------------------------------------------------

    @cached_property
    def contender_ids(self) -> tuple:
        return tuple(c.id for c in self.contenders)

    @property
    def n_contenders(self) -> int:
        return len(self.contenders)

    @cached_property
    def stratum_ids(self) -> tuple:
        return tuple(sorted(self.strata))

    @cached_property
    def casillas_by_stratum(self) -> dict:
        return {s: len(self.strata[s]) for s in self.stratum_ids}

    @property
    def n_casillas(self) -> int:
        return sum(self.casillas_by_stratum.values())

    @cached_property
    def lista_by_stratum(self) -> dict:
        return {
            s: sum(rec.lista_nominal for rec in self.strata[s])
            for s in self.stratum_ids
        }

    @property
    def lista_total(self) -> int:
        return sum(self.lista_by_stratum.values())

    @cached_property
    def votes_by_contender(self) -> dict:
        totals = dict.fromkeys(self.contender_ids, 0)
        for recs in self.strata.values():
            for rec in recs:
                for cid in self.contender_ids:
                    totals[cid] += rec.votes[cid]
        return totals

    @property
    def votes_total(self) -> int:
        return sum(self.votes_by_contender.values())

    @cached_property
    def true_shares(self) -> dict:
        """Exact population share of each contender, as ``Fraction``."""
        tot = self.votes_total
        return {cid: Fraction(v, tot) for cid, v in self.votes_by_contender.items()}

    @cached_property
    def true_share_floats(self) -> dict:
        return {cid: v / self.votes_total for cid, v in self.votes_by_contender.items()}

    @property
    def participation_truth(self) -> Fraction:
        return Fraction(self.votes_total, self.lista_total)

    @property
    def participation_truth_float(self) -> float:
        return self.votes_total / self.lista_total

    @cached_property
    def stratum_of(self) -> dict:
        """casilla_id -> stratum_id lookup."""
        out = {}
        for s, recs in self.strata.items():
            for rec in recs:
                out[rec.casilla_id] = s
        return out

    @cached_property
    def record_of(self) -> dict:
        out = {}
        for recs in self.strata.values():
            for rec in recs:
                out[rec.casilla_id] = rec
        return out

    @cached_property
    def arrays(self) -> _Arrays:
        return _Arrays(self)


@dataclass(frozen=True)
class ReceivedSample:
    """Election-night rows as transmitted, validated against a census."""

    rows: tuple  # tuple[ReceivedRow, ...] in file order

    def __len__(self):
        return len(self.rows)

    @cached_property
    def votes_by_id(self) -> dict:
        return {row.casilla_id: row.votes for row in self.rows}

    @cached_property
    def casilla_ids(self) -> tuple:
        return tuple(row.casilla_id for row in self.rows)


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    where: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    warnings: tuple = ()
    errors: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def clean(self) -> bool:
        return not self.errors and not self.warnings


# ---------------------------------------------------------------------------
# contender schema
# ---------------------------------------------------------------------------

def load_contenders(path) -> tuple:
    """Parse the contender schema config file (see module docstring)."""
    contenders = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SchemaError(f"{path}:{lineno}: expected 'id = kind, label'")
        cid, rhs = (part.strip() for part in line.split("=", 1))
        if "," not in rhs:
            raise SchemaError(f"{path}:{lineno}: expected 'kind, label' after '='")
        kind, label = (part.strip() for part in rhs.split(",", 1))
        if not cid or not label:
            raise SchemaError(f"{path}:{lineno}: empty id or label")
        contenders.append(Contender(id=cid, label=label, kind=kind))
    if len(contenders) < 2:
        raise SchemaError(f"{path}: need at least 2 contenders, got {len(contenders)}")
    return tuple(contenders)


def load_half_widths(path, contenders) -> dict:
    """Parse an ``id = half-width`` config file.

    Half-widths are written in percentage points (as reported by counting
    committees) and returned as fractions in [0, 1].  The special id
    ``participation`` covers the turnout interval.
    """
    known = {c.id for c in contenders} | {PARTICIPATION_KEY}
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SchemaError(f"{path}:{lineno}: expected 'id = half-width-in-pp'")
        cid, rhs = (part.strip() for part in line.split("=", 1))
        if cid not in known:
            raise SchemaError(f"{path}:{lineno}: unknown contender id {cid!r}")
        try:
            value = float(rhs)
        except ValueError:
            raise SchemaError(f"{path}:{lineno}: {rhs!r} is not a number") from None
        if value <= 0:
            raise SchemaError(f"{path}:{lineno}: half-width must be positive")
        out[cid] = value / 100.0
    return out


# ---------------------------------------------------------------------------
# census / received-sample CSV
# ---------------------------------------------------------------------------

def _parse_count(value, path, lineno, column):
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise MalformedRow(
            f"{path}:{lineno}: column {column!r}: {value!r} is not an integer"
        ) from None
    if n < 0:
        raise NegativeCount(f"{path}:{lineno}: column {column!r} is negative ({n})")
    return n


def _check_header(header, expected, path):
    if header != expected:
        missing = [c for c in expected if c not in (header or [])]
        extra = [c for c in (header or []) if c not in expected]
        raise MissingColumn(
            f"{path}: header mismatch; missing={missing} unexpected={extra} "
            f"(expected exactly {expected})"
        )


def load_census(path, contenders) -> Census:
    """Read a census CSV into a validated :class:`Census`."""
    cids = [c.id for c in contenders]
    expected = ["casilla_id", "stratum_id", "lista_nominal"] + cids
    strata: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(header, expected, path)
        seen = set()
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(expected):
                raise MalformedRow(
                    f"{path}:{lineno}: expected {len(expected)} fields, got {len(row)}"
                )
            casilla_id, stratum_id = row[0].strip(), row[1].strip()
            if casilla_id in seen:
                raise DuplicateCasillaId(f"{path}:{lineno}: duplicate casilla id {casilla_id!r}")
            seen.add(casilla_id)
            lista = _parse_count(row[2], path, lineno, "lista_nominal")
            votes = {
                cid: _parse_count(row[3 + j], path, lineno, cid)
                for j, cid in enumerate(cids)
            }
            rec = CasillaRecord(casilla_id, stratum_id, lista, votes)
            strata.setdefault(stratum_id, []).append(rec)
    if not strata:
        raise EmptyStratum(f"{path}: census has no casilla rows")
    census = Census(
        contenders=tuple(contenders),
        strata={s: tuple(recs) for s, recs in strata.items()},
    )
    return census


def write_census(census: Census, path) -> None:
    """Inverse of :func:`load_census` (canonical stratum order)."""
    cids = list(census.contender_ids)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["casilla_id", "stratum_id", "lista_nominal"] + cids)
        for s in census.stratum_ids:
            for rec in census.strata[s]:
                writer.writerow(
                    [rec.casilla_id, rec.stratum_id, rec.lista_nominal]
                    + [rec.votes[cid] for cid in cids]
                )


def load_received(path, census: Census) -> ReceivedSample:
    """Read the election-night rows and validate them against the census."""
    cids = list(census.contender_ids)
    expected = ["casilla_id", "stratum_id"] + cids
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(header, expected, path)
        seen = set()
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(expected):
                raise MalformedRow(
                    f"{path}:{lineno}: expected {len(expected)} fields, got {len(row)}"
                )
            casilla_id, stratum_id = row[0].strip(), row[1].strip()
            if casilla_id in seen:
                raise DuplicateCasillaId(f"{path}:{lineno}: duplicate casilla id {casilla_id!r}")
            seen.add(casilla_id)
            true_stratum = census.stratum_of.get(casilla_id)
            if true_stratum is None:
                raise UnknownCasillaId(
                    f"{path}:{lineno}: casilla {casilla_id!r} not in the census"
                )
            if stratum_id != true_stratum:
                raise StratumMismatch(
                    f"{path}:{lineno}: casilla {casilla_id!r} claims stratum "
                    f"{stratum_id!r} but the census says {true_stratum!r}"
                )
            votes = {
                cid: _parse_count(row[2 + j], path, lineno, cid)
                for j, cid in enumerate(cids)
            }
            rows.append(ReceivedRow(casilla_id, stratum_id, votes))
    return ReceivedSample(rows=tuple(rows))


def write_received(received: ReceivedSample, census: Census, path) -> None:
    cids = list(census.contender_ids)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["casilla_id", "stratum_id"] + cids)
        for row in received.rows:
            writer.writerow(
                [row.casilla_id, row.stratum_id] + [row.votes[cid] for cid in cids]
            )


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def validate(census: Census) -> ValidationReport:
    """Non-mutating health report: hard errors plus data-quality warnings.

    Overvotes (casilla votes above its lista nominal) are warnings, not
    errors: real district-computation data contains them and is used as-is.
    """
    warnings = []
    errors = []
    if not census.strata:
        errors.append(ValidationIssue("EmptyStratum", "<census>", "census has no strata"))
    for s in census.stratum_ids:
        if len(census.strata[s]) == 0:
            errors.append(
                ValidationIssue("EmptyStratum", s, f"stratum {s!r} has no casillas")
            )
    for s in census.stratum_ids:
        for rec in census.strata[s]:
            total = rec.total_votes()
            if total > rec.lista_nominal:
                warnings.append(
                    ValidationIssue(
                        "OvervoteSuspect",
                        rec.casilla_id,
                        f"casilla {rec.casilla_id!r}: {total} votes exceed "
                        f"lista nominal {rec.lista_nominal}",
                    )
                )
            if total == 0:
                warnings.append(
                    ValidationIssue(
                        "ZeroVotes",
                        rec.casilla_id,
                        f"casilla {rec.casilla_id!r} reports zero votes",
                    )
                )
    return ValidationReport(warnings=tuple(warnings), errors=tuple(errors))


# ---------------------------------------------------------------------------
# synthetic elections
# ---------------------------------------------------------------------------

def synth_election(
    n_strata: int,
    casillas_per_stratum: int,
    share_profile,
    dispersion: float = 0.15,
    seed: int = 0,
    lista_range=(300, 750),
    turnout: float = 0.55,
) -> Census:
    """Generate a reproducible synthetic census for tests and demos.

    Casilla-level vote shares are Dirichlet-distributed around
    ``share_profile``; ``dispersion`` controls how much individual casillas
    deviate from it (larger = noisier).  Deterministic for a fixed seed.
    """
    share_profile = tuple(float(p) for p in share_profile)
    if n_strata < 1 or casillas_per_stratum < 1:
        raise InvalidSpec("n_strata and casillas_per_stratum must be positive")
    if len(share_profile) < 2:
        raise InvalidSpec("share_profile needs at least 2 contenders")
    if any(p < 0 for p in share_profile) or abs(sum(share_profile) - 1.0) > 1e-9:
        raise InvalidSpec("share_profile must be nonnegative and sum to 1")
    if dispersion <= 0:
        raise InvalidSpec("dispersion must be positive")
    if not 0 < turnout <= 1:
        raise InvalidSpec("turnout must be in (0, 1]")

    rng = np.random.default_rng(seed)
    contenders = tuple(
        Contender(id=f"c{j + 1}", label=f"Contender {j + 1}")
        for j in range(len(share_profile))
    )
    # floor tiny profile entries so the Dirichlet stays well defined
    alpha = np.maximum(np.asarray(share_profile), 1e-3) / dispersion
    width = len(str(n_strata))
    strata = {}
    for i in range(n_strata):
        sid = f"S{i + 1:0{width}d}"
        recs = []
        for k in range(casillas_per_stratum):
            lista = int(rng.integers(lista_range[0], lista_range[1] + 1))
            total = int(rng.binomial(lista, turnout))
            shares = rng.dirichlet(alpha)
            votes_vec = rng.multinomial(total, shares)
            votes = {c.id: int(v) for c, v in zip(contenders, votes_vec)}
            recs.append(
                CasillaRecord(
                    casilla_id=f"{sid}-{k + 1:04d}",
                    stratum_id=sid,
                    lista_nominal=lista,
                    votes=votes,
                )
            )
        strata[sid] = tuple(recs)
    return Census(contenders=contenders, strata=strata)
