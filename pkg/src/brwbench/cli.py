"""Experiment driver.

Usage::

    brw-bench <mode> --config FILE [--trees M] [--seed S] [--out PATH]
              [--format csv|json] [--cap N] [--c-override X] [--workers W]

Modes: verify-theorem, oracle-check, bound-curve, simulate.

Exit codes: 0 success, 1 usage/config error, 2 statistical violation
(or a broken exact identity in rational mode), 3 resource exhaustion
(population cap everywhere, zero surviving trees, enumeration budget).
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import BoundParams, hoeffding_constant, rw_bound, theorem_bound
from .config import ExperimentConfig, load_config, resolved_dict
from .empirics import deviation_rate
from .errors import (BrwError, EmptyForestError, EnumerationBudgetError,
                     ExperimentConfigError, PopulationOverflowError,
                     PositionDependenceError, SpecValidationError)
from .exact import (enumerate_tiny_forest, exact_rw_distribution, exact_tail,
                    reduction_distance, spine_law, spine_marginal_position)
from .model import ValidatedSpec, hoeffding_ranges, mean_position, validate_spec
from .reporting import config_sha256, render_csv, render_json
from .simulate import simulate_forest, simulate_tree, tree_seed

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VIOLATION = 2
EXIT_RESOURCE = 3

CONSISTENT = "consistent"
VIOLATION = "violation"
NOT_COVERED = "not covered by theorem"


def _exact_str(value):
    return str(value) if isinstance(value, Fraction) else None


def _walk_constants(vspec: ValidatedSpec, cfg: ExperimentConfig):
    """Exponent constant and center position, honoring a user override."""
    if vspec.displacement_position_independent:
        if cfg.c_override is not None:
            c, derivation = float(cfg.c_override), "user override"
        else:
            ranges = hoeffding_ranges(vspec)
            c = hoeffding_constant(ranges)
            derivation = f"2n/sum(w^2) from step widths {ranges}"
        na = mean_position(vspec)
    else:
        if cfg.c_override is None:
            raise ExperimentConfigError(
                "position-dependent steps: no derived bound constant is "
                "available, supply --c-override")
        c, derivation = float(cfg.c_override), "user override"
        na = spine_marginal_position(
            spine_law(vspec, budget=cfg.enumeration_budget)).mean()
    return c, derivation, na


def _report_base(kind: str, cfg: ExperimentConfig) -> dict:
    resolved = resolved_dict(cfg, mode=kind)
    return {
        "kind": kind,
        "versions": {"brwbench": __version__, "numpy": np.__version__},
        "config": resolved,
        "config_sha256": config_sha256(resolved),
    }


# ------------------------------------------------------------------ modes

def run_verify_theorem(cfg: ExperimentConfig) -> dict:
    """Simulate a forest once and compare per-tree quantile deviation rates
    against the quantile bound on the configured (lambda, alpha) grid."""
    vspec = validate_spec(cfg.spec)
    c, derivation, na = _walk_constants(vspec, cfg)
    forest = simulate_forest(vspec, cfg.trees, cfg.master_seed,
                             cap=cfg.cap, workers=cfg.workers)
    if forest.overflow_count == forest.requested:
        raise EmptyForestError("every tree overflowed the population cap")
    if not forest.surviving:
        raise EmptyForestError("zero surviving trees in the sample")

    rows = []
    for lam in cfg.lambda_grid:
        tb = theorem_bound(BoundParams(c=c, n=vspec.n, lam=float(lam)))
        for alpha in cfg.alpha_grid:
            est = deviation_rate(forest, alpha, lam, na)
            covered = not tb.window_empty and tb.covers(float(alpha))
            if not covered:
                status = NOT_COVERED
            elif est.ci_two_sided[0] > tb.bound:
                status = VIOLATION
            else:
                status = CONSISTENT
            rows.append({
                "lambda": lam,
                "alpha": alpha,
                "thm_bound": tb.bound,
                "alpha_lo": tb.alpha_lo,
                "alpha_hi": tb.alpha_hi,
                "status": status,
                "rate_upper": est.rate_upper,
                "ci_upper_lo": est.ci_upper[0],
                "ci_upper_hi": est.ci_upper[1],
                "rate_lower": est.rate_lower,
                "ci_lower_lo": est.ci_lower[0],
                "ci_lower_hi": est.ci_lower[1],
                "rate_two_sided": est.rate_two_sided,
                "ci_two_sided_lo": est.ci_two_sided[0],
                "ci_two_sided_hi": est.ci_two_sided[1],
                "trees_used": est.trees_used,
            })

    report = _report_base("verify-theorem", cfg)
    report.update({
        "constants": {
            "c": c,
            "c_derivation": derivation,
            "na": float(na),
            "na_exact": _exact_str(na),
            "n": vspec.n,
        },
        "forest": {
            "requested": forest.requested,
            "surviving": len(forest.surviving),
            "extinct": forest.extinct_count,
            "overflowed": forest.overflow_count,
            "extinct_fraction": forest.extinct_fraction,
            "master_seed": forest.master_seed,
            "cap": forest.cap,
        },
        "rows": rows,
        "violations": sum(r["status"] == VIOLATION for r in rows),
    })
    return report


VERIFY_CSV_FIELDS = [
    "lambda", "alpha", "thm_bound", "alpha_lo", "alpha_hi", "status",
    "rate_upper", "ci_upper_lo", "ci_upper_hi",
    "rate_lower", "ci_lower_lo", "ci_lower_hi",
    "rate_two_sided", "ci_two_sided_lo", "ci_two_sided_hi", "trees_used",
]


def run_oracle_check(cfg: ExperimentConfig) -> dict:
    """Exact identity checks: path-law reduction distance and the
    survival-conditioned exceedance identity on the lambda grid."""
    vspec = validate_spec(cfg.spec)
    report = _report_base("oracle-check", cfg)
    report["rational_mode"] = vspec.is_rational

    if vspec.displacement_position_independent:
        dist = reduction_distance(vspec, budget=cfg.enumeration_budget)
        report["reduction"] = {
            "distance": float(dist),
            "distance_exact": _exact_str(dist),
            "is_zero": dist == 0,
            "skipped": None,
        }
    else:
        report["reduction"] = {
            "skipped": "position-dependent steps: the plain product step law "
                       "is undefined"}

    rows = []
    skip_reason = None
    if not vspec.branching_position_independent:
        skip_reason = ("position-dependent branching factors: hypothesis (a) "
                       "of the quantile bound is violated, the exceedance "
                       "identity need not hold")
    elif any(g.offspring.support() is None for g in vspec.generations):
        skip_reason = "unbounded offspring support: full enumeration impossible"

    if skip_reason is None:
        for lam in cfg.lambda_grid:
            check = enumerate_tiny_forest(vspec, lam, budget=cfg.enumeration_budget)
            rows.append({
                "lambda": lam,
                "expected_exceedance": float(check.expected_exceedance),
                "expected_exceedance_exact": _exact_str(check.expected_exceedance),
                "tail": float(check.tail),
                "tail_exact": _exact_str(check.tail),
                "difference": float(check.difference),
                "difference_exact": _exact_str(check.difference),
                "exact_match": (check.difference == 0) if vspec.is_rational else None,
            })
    report["identity_rows"] = rows
    report["identity_skipped"] = skip_reason
    report["identity_failures"] = sum(
        1 for r in rows if r["exact_match"] is False)
    return report


ORACLE_CSV_FIELDS = [
    "lambda", "expected_exceedance", "tail", "difference",
    "expected_exceedance_exact", "tail_exact", "difference_exact", "exact_match",
]


def run_bound_curve(cfg: ExperimentConfig) -> dict:
    """Exact one-sided walk tails next to the bound values, per lambda."""
    vspec = validate_spec(cfg.spec)
    if not vspec.displacement_position_independent:
        raise ExperimentConfigError(
            "bound-curve requires position-independent steps")
    dist = exact_rw_distribution(vspec)
    na = dist.mean()
    if cfg.c_override is not None:
        c = float(cfg.c_override)
    else:
        c = hoeffding_constant(hoeffding_ranges(vspec))
    rows = []
    for lam in cfg.lambda_grid:
        params = BoundParams(c=c, n=vspec.n, lam=float(lam))
        tb = theorem_bound(params)
        tail = exact_tail(dist, na + lam)
        rows.append({
            "lambda": lam,
            "exact_tail": float(tail),
            "rw_bound": rw_bound(params),
            "thm_bound": tb.bound,
            "alpha_lo": tb.alpha_lo,
            "alpha_hi": tb.alpha_hi,
            "exact_tail_exact": _exact_str(tail),
        })
    report = _report_base("bound-curve", cfg)
    report.update({
        "constants": {"c": c, "na": float(na), "na_exact": _exact_str(na),
                      "n": vspec.n},
        "rows": rows,
    })
    return report


CURVE_CSV_FIELDS = ["lambda", "exact_tail", "rw_bound", "thm_bound",
                    "alpha_lo", "alpha_hi"]


def run_simulate(cfg: ExperimentConfig) -> dict:
    """Raw forest dump: one row per tree with histogram, sizes, and seed."""
    vspec = validate_spec(cfg.spec)
    rows = []
    overflowed = 0
    surviving = 0
    for i in range(cfg.trees):
        seed = tree_seed(cfg.master_seed, i)
        try:
            run = simulate_tree(vspec, seed, cap=cfg.cap, index=i)
        except PopulationOverflowError as exc:
            overflowed += 1
            rows.append({"index": i, "seed": seed, "status": "overflow",
                         "sizes": None, "histogram": None,
                         "generation": exc.generation,
                         "population": exc.population})
            continue
        hist = None if run.final is None else run.final.as_dict()
        surviving += run.final is not None
        rows.append({"index": i, "seed": seed,
                     "status": "extinct" if run.extinct else "surviving",
                     "sizes": list(run.per_generation_sizes),
                     "histogram": hist})
    if cfg.trees and overflowed == cfg.trees:
        raise EmptyForestError("every tree overflowed the population cap")
    report = _report_base("simulate", cfg)
    report.update({
        "trees": {"requested": cfg.trees, "surviving": surviving,
                  "overflowed": overflowed,
                  "extinct": cfg.trees - surviving - overflowed},
        "rows": rows,
    })
    return report


SIM_CSV_FIELDS = ["index", "seed", "status", "sizes", "histogram"]


def _simulate_csv_rows(rows: list[dict]) -> list[dict]:
    flat = []
    for r in rows:
        hist = r.get("histogram")
        flat.append({
            "index": r["index"], "seed": r["seed"], "status": r["status"],
            "sizes": "|".join(str(s) for s in r["sizes"]) if r.get("sizes") else "",
            "histogram": ";".join(f"{p}:{c}" for p, c in sorted(hist.items()))
            if hist else "",
        })
    return flat


# ------------------------------------------------------------------ entry

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ExperimentConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="brw-bench",
                     description="Branching-random-walk bound verification")
    parser.add_argument("--version", action="version",
                        version=f"brw-bench {__version__}")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in ("verify-theorem", "oracle-check", "bound-curve", "simulate"):
        p = sub.add_parser(mode)
        p.add_argument("--config", required=True, help="TOML or JSON config file")
        p.add_argument("--trees", type=int, help="number of trees (M)")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), dest="fmt")
        p.add_argument("--cap", type=int, help="per-tree population cap")
        p.add_argument("--c-override", type=float, dest="c_override",
                       help="use this exponent constant instead of deriving it")
        p.add_argument("--workers", type=int, default=1,
                       help="parallel tree-simulation workers")
    return parser


def _apply_overrides(cfg: ExperimentConfig, args: argparse.Namespace) -> None:
    if args.trees is not None:
        cfg.trees = args.trees
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.cap is not None:
        cfg.cap = args.cap
    if args.c_override is not None:
        cfg.c_override = args.c_override
    if args.fmt is not None:
        cfg.fmt = args.fmt
    if args.out is not None:
        cfg.out = args.out
    cfg.workers = max(1, args.workers)


_RUNNERS = {
    "verify-theorem": (run_verify_theorem, VERIFY_CSV_FIELDS, "rows"),
    "oracle-check": (run_oracle_check, ORACLE_CSV_FIELDS, "identity_rows"),
    "bound-curve": (run_bound_curve, CURVE_CSV_FIELDS, "rows"),
    "simulate": (run_simulate, SIM_CSV_FIELDS, "rows"),
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args.config)
        _apply_overrides(cfg, args)
        cfg.validate()
        runner, csv_fields, rows_key = _RUNNERS[args.mode]
        report = runner(cfg)
    except (ExperimentConfigError, SpecValidationError, PositionDependenceError,
            ValueError) as exc:
        print(f"brw-bench: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EmptyForestError, EnumerationBudgetError,
            PopulationOverflowError) as exc:
        print(f"brw-bench: resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except BrwError as exc:
        print(f"brw-bench: error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE

    if cfg.fmt == "csv":
        rows = report.get(rows_key, [])
        if args.mode == "simulate":
            rows = _simulate_csv_rows(rows)
        text = render_csv(csv_fields, rows)
    else:
        text = render_json(report)

    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)

    violations = report.get("violations", 0) + report.get("identity_failures", 0)
    if violations:
        print(f"brw-bench: {violations} violation(s) found", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
