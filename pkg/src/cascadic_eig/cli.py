"""Command line front end.

    python -m cascadic_eig solve  --problem laplace --levels 5 --nev 1 --out run.csv
    python -m cascadic_eig study  --problem example2 --nev 6 --baseline
    python -m cascadic_eig verify --levels 5

Exit status is 0 on success, 1 when a solver stage fails and 2 for invalid
configuration or input files.
"""

import argparse
import sys

import numpy as np

from .cascadic import ConfigError, SolverConfig, discretize, verify_theorems
from .assembly import coefficients
from .harness import (ExperimentSpec, StudyError, convergence_rates, emit_plotdata,
                      run_study, csv_text)
from .mesh import MeshError, build_hierarchy, load_mesh, structured_unit_square

EXIT_SOLVER, EXIT_CONFIG = 1, 2


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", choices=["laplace", "example2"], default="laplace")
    common.add_argument("--mesh", help="coarse mesh file (replaces the structured mesh)")
    common.add_argument("--coarse-cells", type=int, default=8)
    common.add_argument("--levels", type=int, default=5)
    common.add_argument("--nev", type=int, default=1)
    common.add_argument("--smoother", choices=["cg", "gs", "jacobi", "richardson"],
                        default="cg")
    common.add_argument("--sigma", type=float, default=2.0)
    common.add_argument("--zeta", type=float, default=1.01)
    common.add_argument("--mbar", type=float, default=2.0)
    common.add_argument("--baseline", action="store_true",
                        help="also solve every level directly")
    common.add_argument("--verify", action="store_true",
                        help="run the auxiliary algorithm alongside")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--out", help="CSV output path (default: standard output)")
    common.add_argument("--plotdata", help="also write a whitespace table for plotting")

    p = argparse.ArgumentParser(prog="cascadic-eig", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="run the solver and write a CSV")
    sub.add_parser("study", parents=[common], help="solve and print convergence rates")
    sub.add_parser("verify", parents=[common],
                   help="solve with baseline and auxiliary runs, check error bounds")
    return p


def _spec(args):
    if args.command == "verify":
        args.baseline = args.verify = True
    cfg = SolverConfig(levels=args.levels, nev=args.nev, smoother=args.smoother,
                       sigma=args.sigma, zeta=args.zeta, mbar=args.mbar)
    return ExperimentSpec(problem=args.problem, coarse_cells=args.coarse_cells,
                          mesh=args.mesh, config=cfg, baseline=args.baseline,
                          verify=args.verify, seed=args.seed, out=args.out)


def _print_rates(records, column, label, out):
    if len(records) < 2:
        return
    rates, summary, notes = convergence_rates(records, column)
    print(f"\n{label}: log2 error ratios between consecutive levels", file=out)
    for j, (row, (lo, hi)) in enumerate(zip(rates, summary)):
        cells = " ".join(f"{r:6.3f}" for r in row)
        print(f"  pair {j + 1}: {cells}   last levels min {lo:.3f} max {hi:.3f}", file=out)
    for n in notes:
        print(f"  note: {n}", file=out)


def _print_table(records, out):
    print(f"{'level':>5} {'h':>10} {'N':>8} {'m':>4} {'work':>10} {'seconds':>8}  lambda_1",
          file=out)
    for r in records:
        print(f"{r.level:5d} {r.h:10.4e} {r.n_dofs:8d} {r.m:4d} {r.work:10d} "
              f"{r.seconds:8.3f}  {r.lam[0]:.10f}", file=out)


def _verify_report(spec, out):
    coarse = load_mesh(spec.mesh) if spec.mesh else structured_unit_square(spec.coarse_cells)
    cfg = spec.config
    disc = discretize(build_hierarchy(coarse, cfg.levels), coefficients(spec.problem))
    rep = verify_theorems(disc, cfg, seed=spec.seed)
    print("\nfinal-level errors (each level as the last level of its own run):", file=out)
    print(f"{'level':>5} {'h':>10} {'|u-aux|_a':>11} {'|u-dir|_a':>11} {'|aux-dir|_a':>11} "
          f"{'|lam-dir|':>10}", file=out)
    for r in rep["table"]:
        print(f"{r['level']:5d} {r['h']:10.4e} {r['u_minus_aux'][0]:11.4e} "
              f"{r['u_minus_dir'][0]:11.4e} {r['aux_minus_dir'][0]:11.4e} "
              f"{abs(r['lam'][0] - r['lam_dir'][0]):10.3e}", file=out)
    ok = True
    for name, (passed, value) in rep["checks"].items():
        ok &= passed
        shown = "" if value is None else f" ({value:.4g})"
        print(f"  {'PASS' if passed else 'FAIL'} {name}{shown}", file=out)
    return ok


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    args = _parser().parse_args(argv)
    try:
        spec = _spec(args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        records = run_study(spec)
    except StudyError as exc:
        if isinstance(exc.cause, (ConfigError, MeshError, FileNotFoundError)):
            print(f"configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if spec.out is None and args.command == "solve":
        out.write(csv_text(records, spec))
    if args.plotdata:
        emit_plotdata(records, args.plotdata)
    if args.command in ("study", "verify"):
        _print_table(records, out)
        if not np.isnan(records[0].err_lam).all():
            _print_rates(records, "err_lam", "eigenvalue error", out)
        if records[0].err_u is not None:
            _print_rates(records, "err_u", "a-norm distance to direct solution", out)
    if args.command == "verify":
        try:
            _verify_report(spec, out)
        except Exception as exc:
            print(f"solver error: verification failed: {exc}", file=sys.stderr)
            return EXIT_SOLVER
    return 0


if __name__ == "__main__":
    sys.exit(main())
