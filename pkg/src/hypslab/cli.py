"""Command line entry point: ``hypslab <subcommand> --config <path> [--out <dir>]``.

Exit status 0 when every check passes, 1 on a check failure, 2 on a
configuration or runtime error.
"""

import os

# BLAS threading would make reductions depend on the thread count
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse  # noqa: E402
import sys  # noqa: E402

SUBCOMMANDS = ("harmonic", "heat", "sl", "linop", "spectral", "morawetz")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hypslab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment configuration file")
        p.add_argument("--out", default=None, help="output directory (default: [output] dir)")
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    from hypslab.runner import format_report, load_config, run_experiment, write_outputs

    try:
        cfg = load_config(args.config)
        res = run_experiment(cfg, args.subcommand)
        out = args.out if args.out is not None else cfg.get("output", "dir")
        write_outputs(res, out)
    except Exception as exc:  # reported as a runtime error
        print(f"hypslab: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(format_report(res))
    return 0 if res.passed else 1


if __name__ == "__main__":
    sys.exit(main())
