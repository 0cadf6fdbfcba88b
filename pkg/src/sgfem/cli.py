"""Command line driver: ``sgfem run|convergence|verify``.

Usage errors exit with status 2, failures inside a computation with 1; in
both cases stderr receives a single line ``sgfem: error: <kind>: <message>``.
"""

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from sgfem.assembly import LOAD_DEGREE, STIFFNESS_DEGREE
from sgfem.element import ElementVariant
from sgfem.mesh import load_mesh, perturbed_mesh, uniform_mesh
from sgfem.model import MaterialParams

CSV_HEADER = ("variant", "lambda", "mu", "iota", "h", "error", "rate")


class UsageError(ValueError):
    pass


def parse_mesh(spec):
    """``uniform:N``, ``perturbed:N,SEED,FACTOR`` or ``file:PATH``."""
    kind, _, arg = spec.partition(":")
    try:
        if kind == "uniform":
            return uniform_mesh(int(arg))
        if kind == "perturbed":
            n, seed, factor = arg.split(",")
            return perturbed_mesh(int(n), int(seed), float(factor))
        if kind == "file":
            return load_mesh(Path(arg).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read mesh file: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"bad mesh spec {spec!r}: {exc}") from None
    raise UsageError(f"bad mesh spec {spec!r}: expected uniform:N, perturbed:N,SEED,FACTOR or file:PATH")


def family_meshes(family, levels):
    """Meshes of a refinement family: ``uniform`` or ``perturbed:SEED,FACTOR``."""
    kind, _, arg = family.partition(":")
    if kind == "uniform" and not arg:
        return [uniform_mesh(n) for n in levels]
    if kind == "perturbed":
        try:
            seed, factor = arg.split(",")
            return [perturbed_mesh(n, int(seed), float(factor)) for n in levels]
        except ValueError as exc:
            raise UsageError(f"bad mesh family {family!r}: {exc}") from None
    raise UsageError(f"bad mesh family {family!r}: expected uniform or perturbed:SEED,FACTOR")


def _number_list(text, kind, what):
    try:
        return [kind(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of numbers (got {text!r})") from None


def _params(lam, mu, iota):
    try:
        return MaterialParams(lam, mu, iota)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _variant(value):
    try:
        return ElementVariant.parse(value)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write(text, path):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def format_rows(rows):
    """Long-form CSV of convergence rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([
            r.variant, f"{r.lam:g}", f"{r.mu:g}", f"{r.iota:g}", f"{r.h:.6g}", f"{r.error:.2e}",
            "" if r.rate is None else f"{r.rate:.2f}",
        ])
    return buf.getvalue()


def _h_label(h):
    n = 1 / h
    return f"1/{round(n)}" if abs(n - round(n)) < 1e-9 else f"{h:.4g}"


def format_pivot(rows):
    """Iota-by-h matrix with a rate line under each error line, one block
    per (variant, lambda, mu)."""
    hs = sorted({r.h for r in rows}, reverse=True)
    blocks = {}
    for r in rows:
        blocks.setdefault((r.variant, r.lam, r.mu), {}).setdefault(r.iota, {})[r.h] = r
    width = 9

    def cells(values):
        return "".join(v.rjust(width) for v in values)

    lines = []
    for (variant, lam, mu), by_iota in blocks.items():
        if lines:
            lines.append("")
        lines.append(f"element {variant}, lambda={lam:g}, mu={mu:g}")
        lines.append("iota\\h".ljust(width) + cells(_h_label(h) for h in hs))
        for iota, row in by_iota.items():
            lines.append(f"{iota:g}".ljust(width) + cells(f"{row[h].error:.2e}" if h in row else "" for h in hs))
            lines.append("rate".ljust(width) + cells(
                f"{row[h].rate:.2f}" if h in row and row[h].rate is not None else "" for h in hs))
    return "\n".join(lines) + "\n"


def cmd_run(args):
    mesh = parse_mesh(args.mesh)
    variant = _variant(args.element)
    params = _params(args.lam, args.mu, args.iota)
    _check_solver(args)
    if args.quad_stiffness < variant.stiffness_degree:
        raise UsageError(f"--quad-stiffness must be >= {variant.stiffness_degree} for element {variant.value}")
    from sgfem.study import run_case

    result = run_case(
        mesh, variant, params, zero_forcing=args.zero_forcing, method=args.solver, tol=args.tol,
        stiffness_degree=args.quad_stiffness, load_degree=args.quad_load, maxiter=args.maxiter,
    )
    _write(json.dumps(result.record(), indent=2) + "\n", args.output)
    return 0


def _check_solver(args):
    if args.solver == "pcg" and not 0 < args.tol <= 1e-4:
        raise UsageError(f"--tol must satisfy 0<tol<=1e-4 for pcg (got {args.tol:g})")
    if args.maxiter is not None and args.maxiter < 1:
        raise UsageError(f"--maxiter must be a positive integer (got {args.maxiter})")
    if not 1 <= args.quad_load <= 20:
        raise UsageError(f"--quad-load must lie in 1..20 (got {args.quad_load})")
    if getattr(args, "quad_stiffness", 1) > 20:
        raise UsageError(f"--quad-stiffness must lie in 1..20 (got {args.quad_stiffness})")


def cmd_convergence(args):
    levels = _number_list(args.levels, int, "--levels")
    if not levels or any(b != 2 * a for a, b in zip(levels, levels[1:])) or min(levels) < 1:
        raise UsageError(f"--levels must be positive and double from one level to the next (got {args.levels})")
    variants = [_variant(v) for v in _number_list(args.element, int, "--element")]
    iotas = _number_list(args.iota, float, "--iota")
    params = [_params(args.lam, args.mu, i) for i in iotas]
    _check_solver(args)
    meshes = family_meshes(args.mesh, levels)
    if args.jobs is not None and args.jobs < 1:
        raise UsageError(f"--jobs must be a positive integer (got {args.jobs})")
    from sgfem.study import convergence_study

    rows = convergence_study(
        meshes, [v.value for v in variants], params, args.solver, args.tol, args.jobs, args.quad_load,
        args.maxiter,
    )
    if args.output:
        _write(format_rows(rows), args.output)
    _write(format_pivot(rows) if args.pivot else ("" if args.output else format_rows(rows)), None)
    if args.emit_plot_data:
        from sgfem.plotting import plot_data_rows

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("variant", "lambda", "mu", "iota", "log_h", "log_error"))
        for v, lam, mu, iota, lh, le in plot_data_rows(rows):
            w.writerow([v, f"{lam:g}", f"{mu:g}", f"{iota:g}", f"{lh:.10g}", f"{le:.10g}"])
        _write(buf.getvalue(), args.emit_plot_data)
    if args.plot:
        from sgfem.plotting import convergence_figure

        convergence_figure(rows, args.plot, title=f"{args.mesh} mesh")
    return 0


def cmd_verify(args):
    if args.triangles < 1:
        raise UsageError(f"--triangles must be positive (got {args.triangles})")
    from sgfem import verification

    failed = 0
    for result in verification.run_all(args.triangles, args.seed):
        print(result.line(), flush=True)
        failed += not result.passed
    print(f"{'PASS' if not failed else 'FAIL'} verify checks_failed={failed}")
    return 1 if failed else 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="sgfem", description="Nonconforming FEM for strain gradient elasticity.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def solver_flags(p):
        p.add_argument("--lambda", dest="lam", type=float, default=1.0)
        p.add_argument("--mu", type=float, default=1.0)
        p.add_argument("--solver", choices=("direct", "pcg", "auto"), default="auto")
        p.add_argument("--tol", type=float, default=1e-10, help="PCG relative residual tolerance")
        p.add_argument("--maxiter", type=int, default=None, help="PCG iteration cap (default 50*sqrt(N))")
        p.add_argument("--quad-load", type=int, default=LOAD_DEGREE, help="load and error quadrature degree")
        p.add_argument("--output", help="output file (default: stdout)")

    run = sub.add_parser("run", help="solve the benchmark once and print a JSON record")
    run.add_argument("--element", default="1")
    run.add_argument("--mesh", default="uniform:16", help="uniform:N | perturbed:N,SEED,FACTOR | file:PATH")
    run.add_argument("--iota", type=float, default=1.0)
    run.add_argument("--zero-forcing", action="store_true", help="solve with f = 0")
    run.add_argument("--quad-stiffness", type=int, default=STIFFNESS_DEGREE)
    solver_flags(run)
    run.set_defaults(func=cmd_run)

    conv = sub.add_parser("convergence", help="relative energy errors and rates over mesh levels")
    conv.add_argument("--element", default="1", help="comma-separated variants, e.g. 1,2")
    conv.add_argument("--mesh", default="uniform", help="uniform | perturbed:SEED,FACTOR")
    conv.add_argument("--levels", default="16,32,64", help="subdivisions per side, doubling")
    conv.add_argument("--iota", default="1,1e-2,1e-5", help="comma-separated iota values")
    conv.add_argument("--pivot", action="store_true", help="print the iota-by-h matrix instead of CSV")
    conv.add_argument("--emit-plot-data", metavar="PATH", help="write (log h, log error) pairs")
    conv.add_argument("--plot", metavar="PATH", help="render a log-log convergence figure")
    conv.add_argument("--jobs", type=int, default=None, help="worker processes (default $SGFEM_JOBS or 1)")
    solver_flags(conv)
    conv.set_defaults(func=cmd_convergence)

    ver = sub.add_parser("verify", help="run the element, assembly and stability self-checks")
    ver.add_argument("--triangles", type=int, default=1000, help="random triangles per variant")
    ver.add_argument("--seed", type=int, default=0)
    ver.set_defaults(func=cmd_verify)
    return parser


def _fail(kind, message, code):
    text = " ".join(str(message).split())
    print(f"sgfem: error: {kind}: {text}", file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        return _fail("usage", exc, 2)
    except Exception as exc:  # single-line report for any module failure
        return _fail(type(exc).__name__, exc, 1)


if __name__ == "__main__":
    sys.exit(main())
