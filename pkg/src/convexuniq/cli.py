"""Command-line interface: ``convexuniq <command> [options]``.

Every option can also be given through an environment variable named
``CONVEXUNIQ_<OPTION>`` (upper case, dashes as underscores), e.g.
``CONVEXUNIQ_GRID_L=32``.  Command-line values win over the environment.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import io
from .errors import ConvexUniqError, HypothesisViolated
from .pipeline import COMMANDS, EXIT_ERROR, EXIT_VIOLATED, RunConfig

ENV_PREFIX = "CONVEXUNIQ_"
log = logging.getLogger("convexuniq")

OPTIONS = [
    # flag, type, default, help
    ("--grid-L", int, 24, "spherical-harmonic band limit of the grid"),
    ("--functional", str, "mean", "curvature functional: mean, gauss, weighted:a,b, power:p, table:path.json"),
    ("--body1", str, "ball:1", "body as a JSON path or preset string kind:p1,p2,...[@ax,ay,az]"),
    ("--body2", str, None, "second body (same formats)"),
    ("--tol-condition", float, 1e-9, "max allowed curvature-condition residual"),
    ("--tol-witness", float, 1e-6, "max ||u1 - u2 - <a,x>|| for a translation verdict"),
    ("--threshold-kind", str, "h2", "kernel threshold policy: h2 or relative"),
    ("--threshold-C", float, None, "kernel threshold constant (defaults to the calibrated value)"),
    ("--coefficients", str, "identity", "coefficient preset when --body2 is absent"),
    ("--cap-center", str, "0,0,1", "cap center as x,y,z"),
    ("--cap-radius", float, 0.8, "cap radius in radians (< pi/2)"),
    ("--mollify", float, None, "heat-kernel mollification scale for coefficients"),
    ("--out", str, None, "output directory for JSON/CSV reports"),
    ("--seed", int, 0, "random seed"),
]


def _env_name(flag):
    return ENV_PREFIX + flag.lstrip("-").replace("-", "_").upper()


def build_parser():
    parser = argparse.ArgumentParser(prog="convexuniq", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        for flag, typ, default, help_ in OPTIONS:
            env = os.environ.get(_env_name(flag))
            if env is not None:
                try:
                    default = typ(env)
                except ValueError:
                    parser.error(f"environment variable {_env_name(flag)}={env!r} is not a valid {typ.__name__}")
            p.add_argument(flag, type=typ, default=default, help=f"{help_} (env {_env_name(flag)})")
    return parser


def config_from_args(args):
    center = tuple(float(c) for c in args.cap_center.split(","))
    return RunConfig(
        grid_L=args.grid_L, functional=args.functional, body1=args.body1, body2=args.body2,
        tol_condition=args.tol_condition, tol_witness=args.tol_witness, threshold_kind=args.threshold_kind,
        threshold_C=args.threshold_C, coefficients=args.coefficients, cap_center=center,
        cap_radius=args.cap_radius, mollify=args.mollify, out=args.out, seed=args.seed,
    )


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = config_from_args(args)
        if config.out:
            with io.output_lock(config.out):
                report, code = COMMANDS[args.command](config)
        else:
            report, code = COMMANDS[args.command](config)
    except HypothesisViolated as exc:
        print(f"hypothesis violated: {exc}", file=sys.stderr)
        return EXIT_VIOLATED
    except (ConvexUniqError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if hasattr(report, "as_dict"):
        report = report.as_dict()
    sys.stdout.write(io.dumps(report))
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
