"""Command-line interface.

Subcommands (one per audit product, plus utilities)::

    quickcount-audit precision   --census ... --schema ...      achievable margins
    quickcount-audit coverage    --census ... --schema ...      joint interval coverage
    quickcount-audit bias        --census ... --schema ... --received ...
    quickcount-audit winner-gap  --census ... --schema ...
    quickcount-audit report      everything above in one deterministic bundle
    quickcount-audit synth       write a synthetic census + schema
    quickcount-audit validate    data-quality report for a census file

Exit codes: 0 success, 1 audit finding (e.g. a contender misses the margin
target), 2 input or configuration error.

Values in a ``--config`` JSON file override flags; flags override defaults.
"""

import argparse
import json
import sys
import time
from pathlib import Path

from . import census as census_mod
from . import report as report_mod
from .biastest import bias_table, compute_differences, corrected_intervals, sign_test
from .errors import AuditError, InvalidConfig
from .montecarlo import coverage_study, precision_study, winner_gap_study
from .report import (
    AuditConfig,
    config_from_sources,
    load_inputs,
    render_bias_md,
    render_bundle_md,
    render_corrected_md,
    render_coverage_md,
    render_precision_md,
    render_sign_tests_md,
    render_winner_gap_md,
    run_report,
    write_bias_csv,
    write_json,
    write_precision_csv,
)

EXIT_OK = 0
EXIT_FINDING = 1
EXIT_INPUT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quickcount-audit",
        description="Ex-post statistical audit of an electoral quick count.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, received=False):
        p.add_argument("--census", dest="census_path", help="census CSV path")
        p.add_argument("--schema", dest="schema_path", help="contender schema config")
        if received:
            p.add_argument("--received", dest="received_path", help="election-night CSV")
        p.add_argument("--half-widths", dest="half_widths_path",
                       help="committee half-widths config (percentage points)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--replicates", type=int, default=None)
        p.add_argument("--sample-size", dest="sample_sizes", type=int, action="append",
                       help="sample size to study (repeatable)")
        p.add_argument("--target-margin", dest="target_margin", type=float, default=None,
                       help="margin-of-error target as a fraction (default 0.005)")
        p.add_argument("--confidence", type=float, default=None)
        p.add_argument("--quantile", dest="quantile_level", type=float, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--format", dest="out_format", choices=report_mod.FORMATS,
                       default=None)
        p.add_argument("--out-dir", dest="out_dir", default=None)
        p.add_argument("--config", dest="config_path",
                       help="JSON config file; overrides flags")

    add_common(sub.add_parser("precision", help="achievable precision per sample size"))
    add_common(sub.add_parser("coverage", help="joint interval coverage study"))

    p_bias = sub.add_parser("bias", help="capture-error diagnostics")
    add_common(p_bias, received=True)
    p_bias.add_argument("--exhaustive", action="store_true", default=None,
                        help="force exact sign-vector enumeration (when feasible)")

    p_gap = sub.add_parser("winner-gap", help="winner-gap distribution study")
    add_common(p_gap)
    p_gap.add_argument("--leader", default=None)
    p_gap.add_argument("--runner-up", dest="runner_up", default=None)
    p_gap.add_argument("--bins", dest="histogram_bins", type=int, default=None)

    p_rep = sub.add_parser("report", help="full audit bundle")
    add_common(p_rep, received=True)
    p_rep.add_argument("--exhaustive", action="store_true", default=None)
    p_rep.add_argument("--leader", default=None)
    p_rep.add_argument("--runner-up", dest="runner_up", default=None)

    p_synth = sub.add_parser("synth", help="generate a synthetic census")
    p_synth.add_argument("--strata", type=int, default=10)
    p_synth.add_argument("--casillas-per-stratum", type=int, default=50)
    p_synth.add_argument("--shares", default="0.4,0.35,0.25",
                         help="comma-separated share profile")
    p_synth.add_argument("--dispersion", type=float, default=0.15)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out-dir", default=".")

    p_val = sub.add_parser("validate", help="census data-quality report")
    p_val.add_argument("--census", dest="census_path", required=True)
    p_val.add_argument("--schema", dest="schema_path", required=True)
    p_val.add_argument("--received", dest="received_path", default=None)

    return parser


def _config_from(args) -> AuditConfig:
    flags = {
        k: v
        for k, v in vars(args).items()
        if k not in ("command", "config_path") and v is not None
    }
    if "sample_sizes" in flags:
        flags["sample_sizes"] = tuple(flags["sample_sizes"])
    return config_from_sources(flags, getattr(args, "config_path", None))


def _out_path(cfg: AuditConfig, name: str, ext: str) -> Path:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / f"{name}.{ext}"


def _emit(cfg: AuditConfig, name, obj, md_text, csv_writer=None):
    """Write the canonical JSON plus the requested presentation format."""
    write_json(obj, _out_path(cfg, name, "json"))
    if cfg.out_format == "markdown":
        _out_path(cfg, name, "md").write_text(md_text, encoding="utf-8")
    elif cfg.out_format == "csv" and csv_writer is not None:
        csv_writer(obj, _out_path(cfg, name, "csv"))
    print(md_text, end="")


def cmd_precision(args) -> int:
    cfg = _config_from(args)
    census, _, _ = load_inputs(cfg)
    code = EXIT_OK
    for c in cfg.sample_sizes:
        rep = precision_study(
            census, c, replicates=cfg.replicates, target_margin=cfg.target_margin,
            quantile_level=cfg.quantile_level, seed=cfg.seed, workers=cfg.workers,
        )
        _emit(cfg, f"precision_c{c}", rep, render_precision_md(rep), write_precision_csv)
        if not rep.all_meet:
            code = EXIT_FINDING
    return code


def cmd_coverage(args) -> int:
    cfg = _config_from(args)
    census, _, half_widths = load_inputs(cfg)
    c = cfg.sample_sizes[-1]
    if half_widths is None:
        # calibrate half-widths from the precision study at the same size
        prec = precision_study(
            census, c, replicates=cfg.replicates, target_margin=cfg.target_margin,
            quantile_level=cfg.quantile_level, seed=cfg.seed, workers=cfg.workers,
        )
        half_widths = prec.half_widths(cfg.include_participation)
    rep = coverage_study(
        census, c, half_widths, replicates=cfg.replicates, seed=cfg.seed,
        confidence=cfg.confidence, include_participation=cfg.include_participation,
        workers=cfg.workers,
    )
    _emit(cfg, f"coverage_c{c}", rep, render_coverage_md(rep))
    return EXIT_OK


def cmd_bias(args) -> int:
    cfg = _config_from(args)
    census, received, half_widths = load_inputs(cfg)
    if received is None:
        raise InvalidConfig("--received is required for the bias diagnostics")
    diffs = compute_differences(received, census)
    table = bias_table(diffs)
    mode = "exhaustive" if cfg.exhaustive else "auto"
    tests = tuple(
        sign_test(diffs[cid], replicates=cfg.replicates, seed=cfg.seed, mode=mode)
        for cid in census.contender_ids
    )
    _emit(cfg, "bias_table", table, render_bias_md(table), write_bias_csv)
    _emit(cfg, "sign_tests", list(tests), render_sign_tests_md(tests))
    if half_widths:
        corr = corrected_intervals(received, census, half_widths, cfg.confidence)
        _emit(cfg, "corrected_intervals", corr, render_corrected_md(corr))
    return EXIT_OK


def cmd_winner_gap(args) -> int:
    cfg = _config_from(args)
    census, _, _ = load_inputs(cfg)
    leader, runner_up = cfg.leader, cfg.runner_up
    if leader is None or runner_up is None:
        top, second = report_mod.default_pair(census)
        leader = leader or top
        runner_up = runner_up or (second if second != leader else top)
    rep = winner_gap_study(
        census, leader, runner_up, cfg.sample_sizes[-1],
        replicates=cfg.replicates, seed=cfg.seed,
        histogram_bins=cfg.histogram_bins, workers=cfg.workers,
    )
    _emit(cfg, "winner_gap", rep, render_winner_gap_md(rep))
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = _config_from(args)
    t0 = time.perf_counter()
    bundle = run_report(cfg)
    elapsed = time.perf_counter() - t0
    md = render_bundle_md(bundle)
    _emit(cfg, "report", bundle, md)
    print(f"report completed in {elapsed:.1f} s", file=sys.stderr)
    missed = any(not rep.all_meet for rep in bundle.precision)
    return EXIT_FINDING if missed else EXIT_OK


def cmd_synth(args) -> int:
    shares = tuple(float(s) for s in args.shares.split(","))
    synthetic = census_mod.synth_election(
        n_strata=args.strata,
        casillas_per_stratum=args.casillas_per_stratum,
        share_profile=shares,
        dispersion=args.dispersion,
        seed=args.seed,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    census_path = out_dir / "census.csv"
    schema_path = out_dir / "contenders.cfg"
    census_mod.write_census(synthetic, census_path)
    schema_path.write_text(
        "".join(
            f"{c.id} = {c.kind}, {c.label}\n" for c in synthetic.contenders
        ),
        encoding="utf-8",
    )
    print(f"wrote {census_path} ({synthetic.n_casillas} casillas) and {schema_path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    contenders = census_mod.load_contenders(args.schema_path)
    loaded = census_mod.load_census(args.census_path, contenders)
    report = census_mod.validate(loaded)
    for issue in report.errors:
        print(f"ERROR {issue.code} at {issue.where}: {issue.message}")
    for issue in report.warnings:
        print(f"warning {issue.code} at {issue.where}: {issue.message}")
    if report.clean:
        print(f"census OK: {loaded.n_casillas} casillas, "
              f"{len(loaded.stratum_ids)} strata, {loaded.n_contenders} contenders")
    if args.received_path:
        received = census_mod.load_received(args.received_path, loaded)
        print(f"received sample OK: {len(received)} rows")
    return EXIT_OK if report.ok else EXIT_INPUT


_COMMANDS = {
    "precision": cmd_precision,
    "coverage": cmd_coverage,
    "bias": cmd_bias,
    "winner-gap": cmd_winner_gap,
    "report": cmd_report,
    "synth": cmd_synth,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_INPUT
    except AuditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
