"""Command-line entry points.

Subcommands:
  run       full pipeline: oracle, branch search, reconstruction, reports
  oracle    reference grid propagation only
  scan      seed scan for one real target position, prints the roots found
  validate  parse and validate a configuration, reporting the first error

Exit codes: 0 success (warnings allowed), 1 configuration/validation
error, 2 fatal pipeline failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config, serialize_config
from .core import backend_name
from .errors import BomcaError, ConfigError
from .pipeline import run_experiment, run_oracle, scan_target


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bomca",
        description="Complex-trajectory wavefunction reconstruction with a grid-propagator oracle.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="path to the experiment JSON config")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for trajectory batches")
        p.add_argument("--verbose", action="store_true", help="progress output")

    p_run = sub.add_parser("run", help="run the full experiment pipeline")
    common(p_run)

    p_oracle = sub.add_parser("oracle", help="run the reference propagation only")
    common(p_oracle)

    p_scan = sub.add_parser("scan", help="seed scan at a single target position")
    common(p_scan)
    p_scan.add_argument("--xf", type=float, required=True, help="real target final position")

    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("config", help="path to the experiment JSON config")
    p_val.add_argument("--verbose", action="store_true", help="echo the materialized config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 1

    if args.command == "validate":
        print(f"{args.config}: ok")
        if args.verbose:
            print(serialize_config(cfg), end="")
        return 0

    try:
        if args.command == "run":
            report = run_experiment(cfg, out_dir=args.out, threads=args.threads, verbose=args.verbose)
            n = report.diagnostics["census"]["n_contributing"]
            labels = {b["id"]: b["label"] for b in report.branches}
            print(f"backend: {report.backend}")
            print(f"branches: {len(report.branches)} found, {n} contributing; labels: {labels}")
            for w in report.warnings:
                print(f"warning: {w}")
            out = args.out if args.out is not None else cfg.output_dir
            print(f"outputs in {out}")
            return 0
        if args.command == "oracle":
            info = run_oracle(cfg, out_dir=args.out, verbose=args.verbose)
            print(
                f"oracle: norm drift {info['norm_drift']:.3e}, "
                f"edge amplitude {info['edge_amplitude']:.3e}"
            )
            return 0
        if args.command == "scan":
            roots, diag = scan_target(cfg, args.xf, threads=args.threads)
            print(f"backend: {backend_name}")
            print(
                f"scan at x_f = {args.xf}: {len(roots)} roots "
                f"({diag.converged}/{diag.n_seeds} seeds converged)"
            )
            for r in roots:
                log_amp = -r.S_f.imag / cfg.constants.hbar
                print(
                    f"  x0 = {r.x0.real:+.9f} {r.x0.imag:+.9f}i   "
                    f"|M| = {abs(r.M_f):.4g}   residual = {r.residual:.2e}   "
                    f"iters = {r.newton_iters}   log|psi| = {log_amp:+.2f}"
                )
            if args.verbose and diag.failures:
                print(f"failures: {diag.failures}")
            return 0
    except BomcaError as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
