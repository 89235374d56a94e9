"""Ex-post statistical audit toolkit for electoral quick counts.

Given the full per-casilla district computation and the sample of casillas a
counting committee received on election night, this package reproduces the
audit battery of such an exercise: achievable precision of stratified
estimates, joint coverage of the published confidence intervals,
sign-randomization tests for capture-error bias, corrected intervals, and
the significance of the winner's lead.
"""

__version__ = "0.1.0"

from . import errors
from .census import (
    CasillaRecord,
    Census,
    Contender,
    PARTICIPATION_KEY,
    ReceivedRow,
    ReceivedSample,
    ValidationReport,
    load_census,
    load_contenders,
    load_half_widths,
    load_received,
    synth_election,
    validate,
    write_census,
    write_received,
)
from .sampler import (
    Allocation,
    SampleDraw,
    draw,
    inclusion_probability,
    proportional_allocation,
)
from .estimator import (
    IntervalSet,
    VoteShareEstimate,
    build_intervals,
    interval_hits,
    ratio_estimate,
)
from .montecarlo import (
    CoverageReport,
    PrecisionReport,
    WinnerGapReport,
    coverage_study,
    precision_study,
    weighted_sums_matrix,
    winner_gap_study,
)
from .biastest import (
    BiasReport,
    CorrectedIntervalReport,
    DiffSeries,
    SignTestResult,
    bias_table,
    compute_differences,
    corrected_intervals,
    sign_test,
)
from .statskit import (
    binomial_pmf,
    binomial_tail_ge,
    empirical_quantile,
    normal_upper_tail,
    shapiro_wilk,
)
from .report import AuditBundle, AuditConfig, run_report

__all__ = [name for name in dir() if not name.startswith("_")]
