"""Exception types shared across the audit toolkit."""


class AuditError(Exception):
    """Base class for every error this package raises on purpose."""


# --- ingestion / data model ---

class SchemaError(AuditError):
    """Contender schema file is malformed or inconsistent."""


class MissingColumn(AuditError):
    """A CSV header does not match the expected column layout."""


class MalformedRow(AuditError):
    """A CSV data row cannot be parsed (wrong arity, non-integer count)."""


class DuplicateCasillaId(AuditError):
    """The same casilla id appears more than once."""


class NegativeCount(AuditError):
    """A vote count or lista-nominal value is negative."""


class EmptyStratum(AuditError):
    """A stratum contains no casillas (or the census has no rows at all)."""


class UnknownCasillaId(AuditError):
    """A casilla id is not present in the census."""


class StratumMismatch(AuditError):
    """A received row disagrees with the census about its stratum."""


class UnknownContender(AuditError):
    """A contender id is not part of the election."""


class InvalidSpec(AuditError):
    """Synthetic-election parameters are out of range."""


# --- sampling / estimation ---

class InfeasibleAllocation(AuditError):
    """Requested sample size cannot be spread over the strata."""


class EmptyStratumSample(AuditError):
    """A stratum has no sampled casillas, so the ratio estimator is undefined."""


class MissingContender(AuditError):
    """An interval or half-width is requested for an absent contender."""


class MissingHalfWidth(AuditError):
    """No half-width supplied for a contender that needs an interval."""


class DegenerateDistribution(AuditError):
    """Simulated statistic has (numerically) zero spread."""


# --- statistics kit ---

class EmptyInput(AuditError):
    """An empirical statistic was asked of zero values."""


class TooFewValues(AuditError):
    """Below the minimum sample size of a test."""


class TooManyValues(AuditError):
    """Above the validated sample-size range of a test."""


class ZeroVariance(AuditError):
    """Sample has no spread, test statistic undefined."""


class DomainError(AuditError):
    """Argument outside the mathematical domain of a function."""


# --- configuration ---

class InvalidConfig(AuditError):
    """CLI / config-file parameters are inconsistent or out of range."""
