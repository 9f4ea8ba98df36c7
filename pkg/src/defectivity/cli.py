"""Command line interface: ``defectivity --matrix grcar:6 --mode real ...``."""

import argparse
import logging
import os
import sys

import numpy as np

from .exceptions import DefectivityError, MaxOuterIterations, ParseError, UnsupportedFormat
from .flow import FlowOptions
from .initialization import candidate, upper_bound
from .io import (
    load_matrix,
    pseudospectrum_grid,
    write_iterate_table,
    write_pseudospectrum_grid,
    write_report,
)
from .outer import OuterOptions, solve_distance
from .structure import StructureMode

log = logging.getLogger("defectivity")

EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(EXIT_USAGE, f"\n{self.prog}: error: {message}\n")


def _complex(text):
    try:
        re, im = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected RE,IM, got {text!r}") from None
    return complex(re, im)


def _grid(text):
    parts = text.split(",")
    if len(parts) < 6:
        raise argparse.ArgumentTypeError("expected re0,re1,im0,im1,nx,ny[,eps...]")
    try:
        box = [float(p) for p in parts[:4]]
        nx, ny = int(parts[4]), int(parts[5])
        levels = [float(p) for p in parts[6:]]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid specification {text!r}") from None
    if nx < 1 or ny < 1:
        raise argparse.ArgumentTypeError("nx and ny must be positive")
    return box, nx, ny, levels


def build_parser():
    p = _Parser(prog="defectivity",
                description="Structured distance to defectivity by gradient flow.")
    p.add_argument("--matrix", required=True,
                   help="grcar:N, example1, json:<rows>, real:<source> or a .mtx path")
    p.add_argument("--mode", default="complex",
                   choices=["complex", "real", "pattern-complex", "pattern-real"])
    p.add_argument("--delta", type=float, default=1e-3,
                   help="target value of r (default 1e-3)")
    p.add_argument("--tol", type=float, default=1e-6, help="stopping tolerance")
    p.add_argument("--eps0", type=float, default=None,
                   help="starting eps (default: half the first-order estimate)")
    p.add_argument("--eps-lo", type=float, default=0.0)
    p.add_argument("--eps-hi", type=float, default=None,
                   help="right bracket end (default: min of the gap bound and 10 eps0)")
    tgt = p.add_mutually_exclusive_group()
    tgt.add_argument("--target", type=_complex, default=None, metavar="RE,IM",
                     help="eigenvalue to follow; the nearest one of A is used")
    tgt.add_argument("--auto-target", action="store_true",
                     help="pick the most likely coalescing eigenvalue (the default)")
    p.add_argument("--theta", type=float, default=0.8,
                   help="bisection weight toward the right end (default 0.8)")
    p.add_argument("--sigma", type=float, default=1.4, help="step growth factor")
    p.add_argument("--max-outer", type=int, default=50)
    p.add_argument("--max-inner-steps", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json-out", metavar="PATH", help="write the report as JSON")
    p.add_argument("--trace", action="store_true", help="log every evaluation to stderr")
    p.add_argument("--iterate-table", action="store_true",
                   help="print the k,eps,r table as CSV on stdout")
    p.add_argument("--pseudospectrum-grid", type=_grid, metavar="RE0,RE1,IM0,IM1,NX,NY,EPS...",
                   help="print sigma_min(A - zI) samples as CSV instead of solving")
    return p


def _configure_logging(trace):
    level = logging.getLevelName(os.environ.get("DEFECTIVITY_LOG", "WARNING").upper())
    if not isinstance(level, int):
        level = logging.WARNING
    if trace:
        level = min(level, logging.INFO)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _check(args):
    if args.delta < 0:
        raise UsageError("--delta must be nonnegative")
    if args.tol <= 0:
        raise UsageError("--tol must be positive")
    if args.sigma <= 1:
        raise UsageError("--sigma must exceed 1")
    if not 0 < args.theta < 1:
        raise UsageError("--theta must lie in (0, 1)")


def run(args, out=None):
    """Execute parsed arguments; returns the report (or None for grid output)."""
    out = out or sys.stdout
    _check(args)
    try:
        A, mask = load_matrix(args.matrix)
    except (OSError, ValueError, ParseError, UnsupportedFormat) as exc:
        raise UsageError(f"cannot load matrix {args.matrix!r}: {exc}") from exc

    if args.pseudospectrum_grid is not None:
        box, nx, ny, levels = args.pseudospectrum_grid
        if levels:
            log.info("contour levels: %s", ", ".join(f"{e:g}" for e in levels))
        write_pseudospectrum_grid(pseudospectrum_grid(A, box[:2], box[2:], nx, ny), out)
        return None

    mode = StructureMode.from_name(args.mode, mask)
    try:
        mode.validate(A)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    cand = candidate(A, mode)
    target = args.target if args.target is not None else cand.target
    eps0 = args.eps0 if args.eps0 is not None else cand.score / 2
    eps_hi = args.eps_hi
    if eps_hi is None:
        eps_hi = min(upper_bound(A, mode), 10.0 * eps0)
    elif eps0 >= eps_hi:
        raise UsageError(f"--eps0 {eps0:g} must lie below --eps-hi {eps_hi:g}")
    if np.isfinite(eps_hi) and eps0 >= eps_hi:
        eps0 = 0.5 * (args.eps_lo + eps_hi)
    if not args.eps_lo <= eps0 < eps_hi:
        raise UsageError(f"eps0 = {eps0:g} is outside [{args.eps_lo:g}, {eps_hi:g})")
    log.info("target %s, eps0 %.6g, bracket [%g, %g]", target, eps0, args.eps_lo, eps_hi)

    flow = FlowOptions(sigma=args.sigma, max_steps=args.max_inner_steps, seed=args.seed)
    opts = OuterOptions(theta=args.theta, max_outer=args.max_outer, flow=flow)
    report = solve_distance(A, mode, args.delta, args.tol, eps0, args.eps_lo, eps_hi,
                            target, opts)
    if args.json_out:
        write_report(report, args.json_out)
    if args.iterate_table:
        write_iterate_table(report, out)
    else:
        lam = ", ".join(f"{z.real:.10f}{z.imag:+.10f}i" for z in report.coalescing_lambdas)
        print(f"mode {mode.name}: eps_delta_star = {report.eps_delta_star:.15g}, "
              f"eps_zero_star = {report.eps_zero_star:.15g}, "
              f"{report.n_outer} outer iterations, pair {lam}", file=out)
    return report


def main(argv=None):
    """Entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.trace)
    try:
        run(args)
    except UsageError as exc:
        parser.print_help(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MaxOuterIterations as exc:
        if args.json_out and exc.report is not None and exc.report.iterates:
            write_report(exc.report, args.json_out)
        print(f"{parser.prog}: solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except DefectivityError as exc:
        print(f"{parser.prog}: solver failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
