"""Command-line entry point ``chaos-splitting``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .experiments import (
    kle_inspect,
    run_corner_study,
    run_order_study,
    run_solve,
    run_timing_table,
    run_variance_study,
)
from .integrators import DenseSizeError
from .kle import IndefiniteKernelError
from .spatial import SingularOperatorError

OUTPUT_ENV = "CHAOS_SPLITTING_OUTPUT"

# flag -> config key
FLAG_KEYS = {
    "N": "grid.N",
    "m": "chaos.m",
    "K": "chaos.K",
    "schemes": "time.schemes",
    "h": "time.h",
    "T": "time.T",
    "seed": "output.seed",
    "output": "output.directory",
}


def _report_order(report) -> None:
    for scheme in report.errors:
        fit = report.slope(scheme)
        slope = "n/a (errors at reference floor)" if fit is None else f"{fit.slope:.3f}"
        print(f"{scheme:>16s}  slope {slope}")


def _report_corner(study) -> None:
    print(f"max error lie {study.max_error('lie'):.3e}  modified-lie {study.max_error('modified-lie'):.3e}  "
          f"ratio {study.ratio:.3f}")


def _report_variance(study) -> None:
    names = list(study.errors)
    print("   m  " + "  ".join(f"{n:>15s}" for n in names))
    for k, m in enumerate(study.m_values):
        print(f"{m:4d}  " + "  ".join(f"{study.errors[n][k]:15.3e}" for n in names))


def _report_timing(result) -> None:
    rows, kle_rows = result
    for r in rows:
        print(f"N={r.N:4d}  {r.scheme:>16s}  {r.median_seconds:.4f} s")
    for n, t in kle_rows:
        print(f"N={n:4d}  {'kl setup':>16s}  {t:.4f} s")


def _report_solve(results) -> None:
    for scheme, sol in results.items():
        print(f"{scheme}: {len(sol.active)} active coefficients of {sol.basis.P}")


def _report_kle(kle) -> None:
    print("  k  lambda")
    for k, lam in enumerate(np.asarray(kle.eigenvalues)[:20]):
        print(f"{k + 1:3d}  {lam:.6e}")


COMMANDS = {
    "solve": (run_solve, _report_solve, "solve all chaos coefficients and write fields"),
    "order-study": (run_order_study, _report_order, "errors and fitted orders over a step-size list"),
    "corner-study": (run_corner_study, _report_corner, "pointwise errors of plain vs corrected Lie splitting"),
    "variance-study": (run_variance_study, _report_variance, "variance error against the truncation level"),
    "timing": (run_timing_table, _report_timing, "median wall-clock time per solve"),
    "kle-inspect": (kle_inspect, _report_kle, "covariance eigenpairs of the random field"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chaos-splitting", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, _, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-c", "--config", help="configuration file (defaults are used without one)")
        p.add_argument("--N", help="interior nodes per direction")
        p.add_argument("--m", help="number of random variables")
        p.add_argument("--K", help="maximal total polynomial degree")
        p.add_argument("--schemes", help="comma-separated scheme names")
        p.add_argument("--h", help="time step, e.g. 2^-10")
        p.add_argument("--T", help="final time")
        p.add_argument("--seed", help="seed for Monte-Carlo checks")
        p.add_argument("-o", "--output", help=f"output directory (overrides ${OUTPUT_ENV})")
        p.add_argument(
            "--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
            help="override any configuration key; may be repeated",
        )
    return parser


def resolve_config(args) -> ExperimentConfig:
    """Config file, then environment, then ``--set``, then dedicated flags."""
    overrides: dict[str, str] = {}
    env_dir = os.environ.get(OUTPUT_ENV)
    if env_dir:
        overrides["output.directory"] = env_dir
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} must have the form section.key=value")
        overrides[key.strip()] = value.strip()
    for flag, key in FLAG_KEYS.items():
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = value
    if args.config:
        return load_config(args.config, overrides)
    return parse_config(ExperimentConfig().to_text(), overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    runner, report, _ = COMMANDS[args.command]
    try:
        cfg = resolve_config(args)
        result = runner(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (IndefiniteKernelError, SingularOperatorError, DenseSizeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    report(result)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
