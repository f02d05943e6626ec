"""Command-line front end: ``jcasmeta {meta,coverage,simulate,compare,moments}``.

Exit status: 0 success, 1 usage or configuration error, 2 numerical
non-convergence, 3 acceptance failure (``compare`` only).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import harness
from .harness import EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, ConfigError

log = logging.getLogger("jcasmeta")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON run configuration (defaults when omitted)")
    common.add_argument("--out", type=Path, default=None, help="output directory (overrides 'outputs')")
    common.add_argument("--seed", type=_u64, default=None, help="override base_seed")
    common.add_argument("--threads", type=_positive_int, default=1, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="jcasmeta", description="SIR meta distributions of joint communication and sensing networks")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("meta", parents=[common], help="analytic meta distributions -> meta_analytic.csv")
    cov = sub.add_parser("coverage", parents=[common], help="first moments over a threshold grid -> coverage.csv")
    cov.add_argument("--theta-grid", type=float, nargs="+", default=None, metavar="DB",
                     help="thresholds in dB (overrides 'theta_grid_db')")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo meta distributions -> meta_empirical.csv, samples.csv")
    cmp_ = sub.add_parser("compare", parents=[common], help="analytic vs Monte Carlo -> comparison.csv, report.json")
    only = cmp_.add_mutually_exclusive_group()
    only.add_argument("--analytic-only", action="store_true")
    only.add_argument("--simulate-only", action="store_true")
    sub.add_parser("moments", parents=[common], help="raw moments M_b -> moments.csv")
    return p


def _load(args) -> harness.RunConfig:
    cfg = harness.parse_config(args.config)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, outputs=args.out)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, base_seed=args.seed))
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"jcasmeta: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    status = EXIT_OK
    if args.command == "meta":
        files, clean = harness.cmd_meta(cfg, args.threads)
    elif args.command == "coverage":
        files, clean = harness.cmd_coverage(cfg, args.theta_grid, args.threads)
    elif args.command == "simulate":
        files, clean = harness.cmd_simulate(cfg, args.threads)
    elif args.command == "moments":
        files, clean = harness.cmd_moments(cfg)
    else:
        reports, files, clean = harness.cmd_compare(
            cfg, args.threads, analytic=not args.simulate_only, simulate=not args.analytic_only
        )
        for r in reports:
            flags = " ".join(f"{k}={'pass' if v else 'FAIL'}" for k, v in r.passed.items())
            print(f"{r.family:8s} theta_c={r.th.theta_c_db:g} dB theta_s={r.th.theta_s_db:g} dB "
                  f"sup_gap={r.sup_norm_gap:.4f} {flags}")
        if not all(all(r.passed.values()) for r in reports):
            status = EXIT_ACCEPTANCE
    for f in files:
        print(f)
    if status == EXIT_OK and not clean:
        log.warning("some quantities did not converge; see the errors columns")
        status = EXIT_NUMERICAL
    return status


if __name__ == "__main__":
    sys.exit(main())
