"""Command line entry point.

Subcommands: ``tables`` (iteration-count sweeps), ``cpattern`` (tensor
truncation counts), ``norms`` (stiffness norm decay data), ``export``
(write one problem instance to files) and ``solve`` (one preconditioned
solve).  Results go to stdout or, with --out, to CSV files.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import (
    DEFAULT_COV,
    TABLE_KINDS,
    Report,
    build_problem,
    emit_c_pattern,
    emit_norm_decay,
    export_case,
    load_config,
    report_csv,
    report_markdown,
    run_table,
    solve_case,
    stiffness_norms,
)
from .galerkin import adaptive_truncation, standard_truncation
from .preconditioners import KINDS


def _add_config_flags(p):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--N", type=int, help="stochastic dimension")
    p.add_argument("--P", type=int, help="solution polynomial degree")
    p.add_argument("--n", type=int, help="mesh subdivisions per side")
    p.add_argument("--tol", type=float, help="relative residual tolerance")
    p.add_argument("--maxit", type=int, help="iteration cap")
    p.add_argument("--sigma-mode", choices=("moment", "gaussian"),
                   dest="sigma_mode", help="CoV to Gaussian sigma mapping")
    p.add_argument("--norm", choices=("frob", "two"),
                   help="stiffness matrix norm")


def _config_from(args):
    overrides = {k: getattr(args, k, None)
                 for k in ("N", "P", "n", "tol", "maxit", "sigma_mode",
                           "norm")}
    return load_config(getattr(args, "config", None), **overrides)


def _emit(report, out, markdown=False):
    text = report_markdown(report) if markdown else report_csv(report)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {out}")
    else:
        sys.stdout.write(text)


def build_parser():
    ap = argparse.ArgumentParser(
        prog="sg",
        description="Stochastic Galerkin solver experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tables", help="run one iteration-count sweep")
    p.add_argument("which", choices=TABLE_KINDS)
    _add_config_flags(p)
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.add_argument("--markdown", action="store_true",
                   help="emit a Markdown table instead of CSV")

    p = sub.add_parser("cpattern",
                       help="nonzero counts of the truncated tensor")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--P", type=int, required=True)
    p.add_argument("--lt", type=int, required=True,
                   help="truncation degree")
    p.add_argument("--out", help="CSV output path (default stdout)")

    p = sub.add_parser("norms", help="stiffness norm decay data")
    _add_config_flags(p)
    p.add_argument("--out",
                   help="path prefix; writes <out>_norms.csv and "
                        "<out>_weighted.csv")

    p = sub.add_parser("export", help="write one instance to files")
    _add_config_flags(p)
    p.add_argument("--dest", required=True, help="output directory")
    p.add_argument("--cov", type=float, default=DEFAULT_COV,
                   help="coefficient of variation in percent")
    p.add_argument("--cap", type=int, default=5000,
                   help="size cap for the dense global matrix")

    p = sub.add_parser("solve", help="one preconditioned solve")
    p.add_argument("--precond", required=True, choices=KINDS)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--lt", type=int,
                       help="standard truncation degree")
    group.add_argument("--tau", type=float,
                       help="adaptive truncation threshold")
    p.add_argument("--cov", type=float, default=DEFAULT_COV,
                   help="coefficient of variation in percent")
    p.add_argument("--mesh", type=int, help="mesh subdivisions per side")
    _add_config_flags(p)
    p.add_argument("--out", help="CSV output path (default stdout)")
    return ap


def _cmd_tables(args):
    config = _config_from(args)
    report = run_table(config, args.which)
    _emit(report, args.out, args.markdown)
    return 0


def _cmd_cpattern(args):
    nnz, n_mv = emit_c_pattern(args.N, args.P, args.lt)
    report = Report("cpattern", ("N", "P", "lt", "nnz", "n_mv"),
                    ({"N": args.N, "P": args.P, "lt": args.lt,
                      "nnz": nnz, "n_mv": n_mv},))
    _emit(report, args.out)
    return 0


def _cmd_norms(args):
    config = _config_from(args)
    norms, weighted = emit_norm_decay(config)
    if args.out:
        _emit(norms, f"{args.out}_norms.csv")
        _emit(weighted, f"{args.out}_weighted.csv")
    else:
        _emit(norms, None)
        sys.stdout.write("\n")
        _emit(weighted, None)
    return 0


def _cmd_export(args):
    config = _config_from(args)
    manifest = export_case(config, args.dest, cov=args.cov, cap=args.cap)
    for name in sorted(manifest):
        print(f"{name}: {manifest[name]}")
    return 0


def _cmd_solve(args):
    config = _config_from(args)
    n = args.mesh if args.mesh is not None else config.n
    op, b = build_problem(config.N, config.P, n, args.cov, config.mu_log,
                          config.L, config.sigma_mode)
    if args.lt is not None:
        trunc = standard_truncation(config.N, args.lt)
    elif args.tau is not None:
        norms = stiffness_norms(op, config.norm)
        trunc = adaptive_truncation(args.tau, norms, op.tensor)
    else:
        trunc = None
    res = solve_case(op, b, args.precond, trunc, config.tol, config.maxit)
    row = {"precond": args.precond, "cov": args.cov, "n": n,
           "ndof": op.n_global,
           "lt": args.lt if args.lt is not None else "",
           "tau": args.tau if args.tau is not None else "",
           "it": res["it"], "kappa": res["kappa"],
           "converged": res["converged"]}
    report = Report("solve", tuple(row), (row,))
    _emit(report, args.out)
    return 0 if res["converged"] else 2


_COMMANDS = {"tables": _cmd_tables, "cpattern": _cmd_cpattern,
             "norms": _cmd_norms, "export": _cmd_export,
             "solve": _cmd_solve}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
