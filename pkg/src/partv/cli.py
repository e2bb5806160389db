"""Command-line harness.

Subcommands:
  run          reconstruction experiment (config file and/or flags)
  frame-check  frame identity suite
  prox-check   proximal oracle suite

Exit codes: 0 success, 1 invalid arguments, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from .checks import frame_check, prox_check
from .experiment import ExperimentConfig, parse_config_file, run_experiment
from .solvers import NumericalFailureError


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; the contract here is exit 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="partv", description="TV-regularized reconstruction via "
                                               "parallel proximal solvers")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the reconstruction experiment")
    p_run.add_argument("--config", help="flat key=value config file; flags override it")
    p_run.add_argument("--size", type=int, help="phantom side length (even)")
    p_run.add_argument("--measurements", type=int, help="number of linear measurements M")
    p_run.add_argument("--snr-db", type=float, dest="snr_db", help="measurement SNR in dB")
    p_run.add_argument("--lambda", type=float, dest="lam", help="regularization weight")
    p_run.add_argument("--step-fractions", dest="step_fractions",
                       help="comma-separated fractions c, step gamma = c/L")
    p_run.add_argument("--iterations", type=int, help="outer iterations per run")
    p_run.add_argument("--solver", dest="variants",
                       help="comma-separated variants (parallel-prox, fast-parallel-prox)")
    p_run.add_argument("--seed", type=int, help="experiment seed")
    p_run.add_argument("--out-dir", dest="out_dir", help="output directory")
    p_run.add_argument("--reference-iterations", type=int, dest="reference_iterations",
                       help="iterations of the C*-pinning reference run")
    p_run.add_argument("--concurrent", action="store_true", default=None,
                       help="run step fractions and proximals concurrently "
                            "(results are identical either way)")

    sub.add_parser("frame-check", help="verify the frame identities")
    sub.add_parser("prox-check", help="verify the proximal operators against oracles")
    return parser


def _experiment_config(args) -> ExperimentConfig:
    kwargs = {}
    if args.config:
        kwargs.update(parse_config_file(args.config))
    for key in ("size", "measurements", "snr_db", "lam", "iterations", "seed",
                "out_dir", "reference_iterations", "concurrent"):
        value = getattr(args, key, None)
        if value is not None:
            kwargs[key] = value
    if args.step_fractions is not None:
        kwargs["step_fractions"] = tuple(float(v) for v in args.step_fractions.split(","))
    if args.variants is not None:
        kwargs["variants"] = tuple(args.variants.split(","))
    if "out_dir" not in kwargs:
        raise ValueError("an output directory is required (--out-dir or out_dir= in the config)")
    return ExperimentConfig(**kwargs)


def _print_checks(results) -> int:
    ok = True
    for name, passed, worst in results:
        print(f"{'PASS' if passed else 'FAIL'} {name} (worst deviation {worst:.3e})")
        ok = ok and passed
    return 0 if ok else 2


def cli_main(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1

    if args.command == "frame-check":
        return _print_checks(frame_check())
    if args.command == "prox-check":
        return _print_checks(prox_check())

    try:
        config = _experiment_config(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    try:
        report = run_experiment(config)
    except NumericalFailureError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2
    print(f"C* = {report.cstar:.17g}")
    print(f"L  = {report.lipschitz:.17g}")
    for rr in report.runs:
        print(f"run {rr.label}: final gap {rr.final_gap:.6e}, "
              f"SNR vs phantom {rr.snr_vs_phantom:.2f} dB, "
              f"rel l2 vs TV reference {rr.rel_l2_vs_reference:.4f}")
    print(f"outputs in {config.out_dir} ({len(report.manifest)} files)")
    return 0


def main() -> int:
    return cli_main(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
