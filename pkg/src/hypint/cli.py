"""``hypint <command> --config <file> [--seed N] [--samples N] [--out <file>]``"""
from __future__ import annotations

import argparse
import sys

from . import harness
from .errors import HypintError


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hypint", description="Run an integral-geometry identity check.")
    p.add_argument("command", choices=harness.COMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--samples", type=int, help="Monte Carlo budget (overrides the config)")
    p.add_argument("--out", help="report path (JSON); a CSV table is written next to it")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = harness.RunConfig.load(args.config, command=args.command, seed=args.seed, n_samples=args.samples,
                                     out=args.out)
        report = harness.run(cfg)
    except HypintError as exc:
        print(f"hypint: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    if cfg.out:
        js, cs = harness.write_report(report, cfg.out)
        print(f"wrote {js} and {cs}", file=sys.stderr)
    else:
        sys.stdout.write(harness.report_json(report))
    status = "PASS" if report.passed else "FAIL"
    print(f"{cfg.command}: {status} residual={report.residual:.6g} tol={report.combined_tolerance:.6g} "
          f"({report.wall_time:.1f} s)", file=sys.stderr)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
