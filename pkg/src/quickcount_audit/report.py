"""Audit configuration, orchestration, and report serialization.

Ties the pieces together: load the census and the election-night sample,
run the precision / coverage / winner-gap simulations and the capture-error
diagnostics, and bundle every table into machine-readable (JSON, CSV) and
human-readable (markdown) form.

Determinism: a bundle is a pure function of the input files and the
semantic parameters (seed, replicates, sizes, ...).  Wall-clock timings are
deliberately kept out of the serialized reports so repeated runs produce
byte-identical files; the run id is a digest of inputs and parameters.
"""

import csv
import dataclasses
import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path

from . import __version__ as _version
from .biastest import (
    BiasReport,
    CorrectedIntervalReport,
    SignTestResult,
    bias_table,
    compute_differences,
    corrected_intervals,
    sign_test,
)
from .census import (
    Census,
    load_census,
    load_contenders,
    load_half_widths,
    load_received,
)
from .errors import InvalidConfig
from .montecarlo import (
    CoverageReport,
    PrecisionReport,
    WinnerGapReport,
    coverage_study,
    precision_study,
    weighted_sums_matrix,
    winner_gap_study,
)
from .sampler import proportional_allocation

FORMATS = ("json", "csv", "markdown")


@dataclass
class AuditConfig:
    """Everything one audit run needs; mirrors the CLI flags."""

    census_path: str | None = None
    schema_path: str | None = None
    received_path: str | None = None
    half_widths_path: str | None = None
    target_margin: float = 0.005
    confidence: float = 0.95
    quantile_level: float = 0.95
    replicates: int = 100_000
    seed: int = 0
    sample_sizes: tuple = (1200, 1347)
    leader: str | None = None
    runner_up: str | None = None
    include_participation: bool = True
    exhaustive: bool = False
    histogram_bins: int = 60
    workers: int = 1
    out_format: str = "markdown"
    out_dir: str = "."

    def validate(self) -> "AuditConfig":
        if not 0.0 < self.target_margin < 1.0:
            raise InvalidConfig(f"target_margin must be in (0, 1), got {self.target_margin}")
        if not 0.0 < self.confidence < 1.0:
            raise InvalidConfig(
                f"confidence must be strictly inside (0, 1), got {self.confidence}; "
                "a 100% level forces the useless [0, 1] interval"
            )
        if not 0.0 < self.quantile_level <= 1.0:
            raise InvalidConfig("quantile_level must be in (0, 1]")
        if self.replicates < 1000:
            raise InvalidConfig(f"replicates must be >= 1000, got {self.replicates}")
        if not self.sample_sizes or any(int(c) < 1 for c in self.sample_sizes):
            raise InvalidConfig("sample_sizes must be positive integers")
        if self.leader is not None and self.leader == self.runner_up:
            raise InvalidConfig("leader and runner-up must differ")
        if self.out_format not in FORMATS:
            raise InvalidConfig(f"format must be one of {FORMATS}, got {self.out_format!r}")
        if self.workers < 1:
            raise InvalidConfig("workers must be >= 1")
        return self


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(AuditConfig)}


def config_from_sources(flags: dict, config_path: str | None = None) -> AuditConfig:
    """Merge precedence: defaults < command-line flags < config file."""
    merged = {}
    merged.update({k: v for k, v in flags.items() if v is not None})
    if config_path:
        try:
            data = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidConfig(f"cannot read config file {config_path}: {exc}") from None
        unknown = set(data) - _CONFIG_FIELDS
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        merged.update(data)
    if "sample_sizes" in merged:
        merged["sample_sizes"] = tuple(int(c) for c in merged["sample_sizes"])
    return AuditConfig(**merged).validate()


# ---------------------------------------------------------------------------
# bundle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AuditBundle:
    run: dict
    precision: tuple            # one PrecisionReport per sample size
    coverage: CoverageReport | None
    winner_gap: WinnerGapReport | None
    bias: BiasReport | None
    sign_tests: tuple           # SignTestResult per contender
    corrected: CorrectedIntervalReport | None

    def to_dict(self) -> dict:
        def conv(obj):
            if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
                return {k: conv(v) for k, v in dataclasses.asdict(obj).items()}
            if isinstance(obj, dict):
                return {k: conv(v) for k, v in obj.items()}
            if isinstance(obj, (list, tuple)):
                return [conv(v) for v in obj]
            return obj

        return {
            "run": conv(self.run),
            "precision": conv(list(self.precision)),
            "coverage": conv(self.coverage),
            "winner_gap": conv(self.winner_gap),
            "bias": conv(self.bias),
            "sign_tests": conv(list(self.sign_tests)),
            "corrected_intervals": conv(self.corrected),
        }


def census_digest(census: Census) -> str:
    buf = io.StringIO()
    write = buf.write
    write(",".join(census.contender_ids) + "\n")
    for s in census.stratum_ids:
        for rec in census.strata[s]:
            write(
                f"{rec.casilla_id},{rec.stratum_id},{rec.lista_nominal},"
                + ",".join(str(rec.votes[cid]) for cid in census.contender_ids)
                + "\n"
            )
    return hashlib.sha256(buf.getvalue().encode()).hexdigest()


def _run_metadata(cfg: AuditConfig, census: Census, received) -> dict:
    payload = {
        "census_sha256": census_digest(census),
        "received_rows": len(received) if received is not None else 0,
        "seed": cfg.seed,
        "replicates": cfg.replicates,
        "sample_sizes": list(cfg.sample_sizes),
        "target_margin": cfg.target_margin,
        "confidence": cfg.confidence,
        "quantile_level": cfg.quantile_level,
        "leader": cfg.leader,
        "runner_up": cfg.runner_up,
        "include_participation": cfg.include_participation,
    }
    run_id = hashlib.sha256(
        json.dumps(payload, sort_keys=True).encode()
    ).hexdigest()[:16]
    return {"run_id": run_id, "version": _version, **payload}


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

def load_inputs(cfg: AuditConfig):
    """(census, received, cotecora_half_widths) from the configured paths."""
    if not cfg.census_path or not cfg.schema_path:
        raise InvalidConfig("--census and --schema are required")
    contenders = load_contenders(cfg.schema_path)
    census = load_census(cfg.census_path, contenders)
    received = (
        load_received(cfg.received_path, census) if cfg.received_path else None
    )
    half_widths = (
        load_half_widths(cfg.half_widths_path, contenders)
        if cfg.half_widths_path
        else None
    )
    return census, received, half_widths


def default_pair(census: Census) -> tuple:
    """Leader and runner-up by census share, as a fallback for the gap study."""
    ranked = sorted(
        census.true_share_floats.items(), key=lambda kv: (-kv[1], kv[0])
    )
    return ranked[0][0], ranked[1][0]


def run_report(cfg: AuditConfig, census: Census = None, received=None, half_widths=None) -> AuditBundle:
    """Run every study of the audit and bundle the reports.

    Studies that need draws of the same sample size share one simulated
    weighted-sums matrix, which is exactly what each would have computed on
    its own from ``(seed, size)``.
    """
    cfg.validate()
    if census is None:
        census, received, half_widths = load_inputs(cfg)

    sizes = [int(c) for c in cfg.sample_sizes]
    sums_cache = {}

    def sums_for(c):
        if c not in sums_cache:
            allocation = proportional_allocation(census, c)
            sums_cache[c] = weighted_sums_matrix(
                census, allocation, cfg.seed, cfg.replicates, cfg.workers
            )
        return sums_cache[c]

    precision = tuple(
        precision_study(
            census,
            c,
            replicates=cfg.replicates,
            target_margin=cfg.target_margin,
            quantile_level=cfg.quantile_level,
            seed=cfg.seed,
            sums=sums_for(c),
        )
        for c in sizes
    )

    study_size = sizes[-1]
    study_precision = precision[-1]
    coverage = coverage_study(
        census,
        study_size,
        study_precision.half_widths(cfg.include_participation),
        replicates=cfg.replicates,
        seed=cfg.seed,
        confidence=cfg.confidence,
        include_participation=cfg.include_participation,
        sums=sums_for(study_size),
    )

    leader, runner_up = cfg.leader, cfg.runner_up
    if leader is None or runner_up is None:
        top, second = default_pair(census)
        leader = leader or top
        runner_up = runner_up or (second if second != leader else top)
    winner_gap = winner_gap_study(
        census,
        leader,
        runner_up,
        study_size,
        replicates=cfg.replicates,
        seed=cfg.seed,
        histogram_bins=cfg.histogram_bins,
        sums=sums_for(study_size),
    )

    bias = None
    sign_tests = ()
    corrected = None
    if received is not None:
        diffs = compute_differences(received, census)
        bias = bias_table(diffs)
        mode = "exhaustive" if cfg.exhaustive else "auto"
        sign_tests = tuple(
            sign_test(diffs[cid], replicates=cfg.replicates, seed=cfg.seed, mode=mode)
            for cid in census.contender_ids
        )
        if half_widths:
            corrected = corrected_intervals(
                received, census, half_widths, confidence=cfg.confidence
            )

    return AuditBundle(
        run=_run_metadata(cfg, census, received),
        precision=precision,
        coverage=coverage,
        winner_gap=winner_gap,
        bias=bias,
        sign_tests=sign_tests,
        corrected=corrected,
    )


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

def _pct(x, digits=2):
    return f"{100.0 * x:.{digits}f}"


def _pvalue_pct(p):
    return "<1" if p < 0.01 else f"{round(100.0 * p):d}"


def render_precision_md(report: PrecisionReport) -> str:
    lines = [
        f"### Achievable precision, {report.sample_size} casillas "
        f"({report.replicates} replicates, {_pct(report.quantile_level, 0)}% quantile)",
        "",
        "| Contender | Census share (%) | Achievable margin (%) | Meets "
        f"{_pct(report.target_margin)}% target |",
        "|---|---|---|---|",
    ]
    for cid, eps in report.epsilons.items():
        lines.append(
            f"| {cid} | {_pct(report.truths[cid])} | {_pct(eps)} | "
            f"{'yes' if report.meets_target[cid] else 'NO'} |"
        )
    lines.append(
        f"| participation | {_pct(report.participation_truth)} | "
        f"{_pct(report.participation_epsilon)} | - |"
    )
    return "\n".join(lines) + "\n"


def render_coverage_md(report: CoverageReport) -> str:
    lines = [
        f"### Joint interval coverage, {report.sample_size} casillas "
        f"({report.binomial_r} intervals at {_pct(report.confidence, 0)}% confidence)",
        "",
        "| Intervals missing the census value | Simulated (%) | Binomial (%) |",
        "|---|---|---|",
        f"| 0 | {_pct(report.p_zero_miss, 1)} | {_pct(report.binomial_zero, 1)} |",
        f"| 1 or more | {_pct(report.p_ge1_miss, 1)} | {_pct(report.binomial_ge1, 1)} |",
        f"| 2 or more | {_pct(report.p_ge2_miss, 1)} | {_pct(report.binomial_ge2, 1)} |",
    ]
    return "\n".join(lines) + "\n"


def render_bias_md(report: BiasReport) -> str:
    lines = [
        f"### Capture-error summary over {report.n_casillas} received casillas",
        "",
        "| Contender | No error (%) | In favour (%) | Against (%) | Mean diff (votes/casilla) |",
        "|---|---|---|---|---|",
    ]
    for cid, row in report.rows.items():
        lines.append(
            f"| {cid} | {row.pct_zero:.1f} | {row.pct_positive:.1f} | "
            f"{row.pct_negative:.1f} | {row.mean_diff:.2f} |"
        )
    return "\n".join(lines) + "\n"


def render_sign_tests_md(results) -> str:
    lines = [
        "### Sign-randomization tests (random capture errors hypothesis)",
        "",
        "| Contender | p-value (%) | Mean diff | Mode |",
        "|---|---|---|---|",
    ]
    for res in results:
        lines.append(
            f"| {res.contender_id} | {_pvalue_pct(res.p_value)} | "
            f"{res.mean_diff:.2f} | {res.mode} |"
        )
    return "\n".join(lines) + "\n"


def render_corrected_md(report: CorrectedIntervalReport) -> str:
    lines = [
        "### Intervals with and without capture errors",
        "",
        "| Key | As received | Hit | Corrected | Hit | Census value (%) |",
        "|---|---|---|---|---|---|",
    ]
    for key, row in report.rows.items():
        lines.append(
            f"| {key} "
            f"| [{_pct(row.received_lower)}, {_pct(row.received_upper)}] "
            f"| {'yes' if row.received_hit else 'NO'} "
            f"| [{_pct(row.corrected_lower)}, {_pct(row.corrected_upper)}] "
            f"| {'yes' if row.corrected_hit else 'NO'} "
            f"| {_pct(row.truth)} |"
        )
    return "\n".join(lines) + "\n"


def render_winner_gap_md(report: WinnerGapReport) -> str:
    lines = [
        f"### Winner gap: {report.leader} minus {report.runner_up} "
        f"({report.sample_size} casillas, {report.replicates} replicates)",
        "",
        f"- mean gap: {_pct(report.mean_diff)}%",
        f"- standard deviation: {_pct(report.sd_diff)}%",
        f"- simulated gaps below zero: {_pct(report.empirical_neg_frac)}%",
    ]
    if report.degenerate:
        lines.append("- degenerate distribution (zero spread): normal fit skipped")
    else:
        lines.append(
            f"- Shapiro-Wilk on {report.shapiro_n} gaps: W = {report.shapiro_w:.4f}, "
            f"p = {_pct(report.shapiro_p)}%"
        )
        lines.append(
            f"- P(gap < 0) under the fitted normal: {100.0 * report.normal_tail_prob:.2e}%"
        )
    return "\n".join(lines) + "\n"


def render_bundle_md(bundle: AuditBundle) -> str:
    parts = [
        f"## Quick-count audit report (run {bundle.run['run_id']}, "
        f"seed {bundle.run['seed']})",
        "",
    ]
    for rep in bundle.precision:
        parts.append(render_precision_md(rep))
    if bundle.coverage:
        parts.append(render_coverage_md(bundle.coverage))
    if bundle.bias:
        parts.append(render_bias_md(bundle.bias))
    if bundle.sign_tests:
        parts.append(render_sign_tests_md(bundle.sign_tests))
    if bundle.corrected:
        parts.append(render_corrected_md(bundle.corrected))
    if bundle.winner_gap:
        parts.append(render_winner_gap_md(bundle.winner_gap))
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# file output
# ---------------------------------------------------------------------------

def _asdict(obj):
    if isinstance(obj, AuditBundle):
        return obj.to_dict()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return dataclasses.asdict(obj)
    if isinstance(obj, (list, tuple)):
        return [_asdict(v) for v in obj]
    return obj


def write_json(obj, path) -> None:
    Path(path).write_text(
        json.dumps(_asdict(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def write_precision_csv(report: PrecisionReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["contender", "truth", "epsilon", "std_error", "meets_target"])
        for cid, eps in report.epsilons.items():
            writer.writerow(
                [cid, repr(report.truths[cid]), repr(eps),
                 repr(report.std_errors[cid]), report.meets_target[cid]]
            )
        writer.writerow(
            ["participation", repr(report.participation_truth),
             repr(report.participation_epsilon), repr(report.participation_se), ""]
        )


def write_bias_csv(report: BiasReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["contender", "pct_zero", "pct_positive", "pct_negative", "mean_diff"]
        )
        for cid, row in report.rows.items():
            writer.writerow(
                [cid, repr(row.pct_zero), repr(row.pct_positive),
                 repr(row.pct_negative), repr(row.mean_diff)]
            )
