"""Command-line front end: ``fastmm <command> ...``."""

from __future__ import annotations

import argparse
import csv
import statistics
import sys
import time
from fractions import Fraction

import numpy as np

from . import algo_spec, engine, oracle, scaling, stability
from .matrices import DISTRIBUTIONS, generate, read_matrix, write_matrix, write_text_matrix

ERROR_COLUMNS = ["algo", "plan", "m", "k", "n", "dist", "seed", "L", "scaling",
                 "steps_taken", "max_abs_err", "max_rel_err", "bound"]
PERF_COLUMNS = ["algo", "m", "k", "n", "L", "scaling", "seconds_median", "effective_gflops"]


def parse_levels(text):
    """``"1..4"``, ``"0,2,3"`` or ``"2"`` to a list of ints."""
    out = []
    for part in text.split(","):
        lo, sep, hi = part.partition("..")
        out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
    if not out:
        raise argparse.ArgumentTypeError("empty level range")
    return out


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else repr(float(x))
    return str(x)


class _CsvOut:
    """CSV writer that flushes after every row."""

    def __init__(self, path, columns):
        self.fh = open(path, "w", newline="") if path and path != "-" else sys.stdout
        self.writer = csv.writer(self.fh, lineterminator="\n")
        self.writer.writerow(columns)
        self.fh.flush()

    def row(self, values):
        self.writer.writerow([_fmt(v) for v in values])
        self.fh.flush()

    def close(self):
        if self.fh is not sys.stdout:
            self.fh.close()


def _scaling_config(args, mode):
    return scaling.parse_mode(mode, first_step=args.first_step, tau=args.tau,
                              max_steps=args.max_steps, pow2=args.pow2)


def _plans(args):
    """Yield ``(algo label, L, plan)`` for the requested algorithms and levels."""
    if args.plan:
        plan = engine.parse_plan(args.plan)
        root = engine.as_tree(plan)
        yield (root.alg.name if root else "classical"), engine.plan_depth(plan), plan
        return
    for ref in args.algo.split(","):
        alg = algo_spec.get_algorithm(ref)
        for L in args.levels:
            yield alg.name, L, engine.Stationary(alg, L) if L else engine.CLASSICAL


def _scaled_bound(plan, m, k, n, state):
    kp = engine.pad_dims(m, k, n, plan)[1]
    norm_a = oracle.max_norm(state.a_scaled)
    norm_b = oracle.max_norm(state.b_scaled)
    return (stability.plan_bound(plan, kp, norm_a, norm_b)
            * float(state.d_a.max()) * float(state.d_b.max()))


# -- commands -----------------------------------------------------------------

def cmd_validate(args):
    try:
        with open(args.path, encoding="utf-8") as fh:
            triple = algo_spec.parse_algorithm(fh.read())
    except algo_spec.ParseError as exc:
        print(f"{args.path}: {exc}", file=sys.stderr)
        return 2
    except (OSError, algo_spec.StructuralError) as exc:
        print(f"{args.path}: {exc}", file=sys.stderr)
        return 2
    bad = algo_spec.find_violations(triple)
    if bad:
        print(f"{triple.name}: INVALID, {len(bad)} violated triples (i, j, k, sum):")
        for i, j, k, s in bad:
            print(f"  {i} {j} {k} {s}")
        return 1
    m0, k0, n0 = triple.dims
    print(f"{triple.name}: valid <{m0},{k0},{n0}> rank {triple.rank}")
    return 0


def cmd_analyze(args):
    if args.plan:
        plan = engine.parse_plan(args.plan)
        rep = stability.analyze_plan(plan, args.k)
        print(f"plan {engine.format_plan(plan)}")
        print(f"delta_max {rep.delta_max}")
        print(f"xi_max {_fmt(rep.xi_max)}")
        print(f"bound_coefficient {_fmt(rep.bound_coefficient)}")
        return 0
    rows = []
    for ref in args.refs:
        rep = stability.analyze(algo_spec.get_algorithm(ref), dnc=args.dnc)
        base = stability.report_rows(rep)
        for L in args.levels:
            flops, rel = stability.tradeoff_point(rep, L)
            rows.append({**base, "L": L, "flop_fraction": float(flops),
                         "rel_stability": float(rel)})
        if args.format == "text":
            for key, val in base.items():
                print(f"{key} {val}")
            print("q " + " ".join(map(str, rep.q)))
            print("e " + " ".join(_fmt(x) for x in rep.e))
            for row in rows[-len(args.levels):]:
                print(f"tradeoff L={row['L']} flop_fraction {row['flop_fraction']!r} "
                      f"rel_stability {row['rel_stability']!r}")
            print()
    if args.format == "csv":
        out = _CsvOut(args.out, list(rows[0]))
        for row in rows:
            out.row(row.values())
        out.close()
    return 0


def cmd_gen(args):
    a, b = generate(args.dist, args.m, args.k, args.n, args.seed)
    write = write_text_matrix if args.text else write_matrix
    write(args.out_a, a)
    write(args.out_b, b)
    return 0


def cmd_multiply(args):
    a, b = read_matrix(args.a), read_matrix(args.b)
    plan = engine.parse_plan(args.plan) if args.plan else (
        engine.Stationary(algo_spec.get_algorithm(args.algo), args.levels[0])
        if args.levels[0] else engine.CLASSICAL)
    if args.check_finite and not (np.isfinite(a).all() and np.isfinite(b).all()):
        print("inputs contain NaN or Inf", file=sys.stderr)
        return 2
    cfg = _scaling_config(args, args.scaling)
    state, _ = scaling.scale(a, b, cfg)
    c = scaling.unscale(engine.multiply(state.a_scaled, state.b_scaled, plan, fast=args.fast),
                        state)
    if args.out:
        write_matrix(args.out, c)
    if args.check:
        m, k = a.shape
        rep = oracle.compare(c, oracle.multiply_reference(a, b),
                             _scaled_bound(plan, m, k, b.shape[1], state))
        print(f"max_abs_err {rep.max_abs_err!r}")
        print(f"max_rel_err {rep.max_rel_err!r}")
        print(f"zero_ref_count {rep.zero_ref_count}")
        print(f"bound {rep.bound!r}")
    return 0


def error_rows(args):
    """Rows of the bench-error table, one per (plan, scaling mode)."""
    a, b = generate(args.dist, args.m, args.k, args.n, args.seed)
    ref = oracle.multiply_reference(a, b)
    for algo, L, plan in _plans(args):
        for mode in args.scaling:
            cfg = _scaling_config(args, mode)
            state, _ = scaling.scale(a, b, cfg)
            c = scaling.unscale(
                engine.multiply(state.a_scaled, state.b_scaled, plan, fast=args.fast), state)
            rep = oracle.compare(c, ref)
            bound = _scaled_bound(plan, args.m, args.k, args.n, state)
            yield [algo, engine.format_plan(plan), args.m, args.k, args.n, args.dist,
                   args.seed, L, cfg.label, state.steps_taken, rep.max_abs_err,
                   rep.max_rel_err, bound]


def cmd_bench_error(args):
    out = _CsvOut(args.out, ERROR_COLUMNS)
    try:
        for row in error_rows(args):
            out.row(row)
    finally:
        out.close()
    return 0


def _time(fn, reps):
    times = []
    for _ in range(reps):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return statistics.median(times)


def perf_rows(args):
    a, b = generate(args.dist, args.m, args.k, args.n, args.seed)
    for algo, L, plan in _plans(args):
        for mode in args.scaling:
            cfg = _scaling_config(args, mode)
            fn = lambda: scaling.scaled_multiply(a, b, plan, cfg, fast=args.fast)  # noqa: E731
            fn()  # warm-up (JIT compilation, allocator)
            secs = _time(fn, args.reps)
            yield [algo if L else "classical", args.m, args.k, args.n, L, cfg.label, secs,
                   oracle.effective_gflops(args.m, args.k, args.n, secs)]


def cmd_bench_perf(args):
    out = _CsvOut(args.out, PERF_COLUMNS)
    try:
        for row in perf_rows(args):
            out.row(row)
    finally:
        out.close()
    return 0


def cmd_scale(args):
    if args.a and args.b:
        a, b = read_matrix(args.a), read_matrix(args.b)
    else:
        a, b = generate(args.dist, args.m, args.k, args.n, args.seed)
    cfg = _scaling_config(args, args.scaling)
    state, trace = scaling.scale(a, b, cfg)
    out = _CsvOut(args.out, ["step", "kind", "w", "tested", "stop", "norm_a", "norm_b"])
    for t, rec in enumerate(trace.steps, start=1):
        out.row([t, rec.kind, rec.w, int(rec.tested), int(rec.stop), rec.norm_a, rec.norm_b])
    out.close()
    print(f"# steps_taken {state.steps_taken} stopped {int(trace.stopped)} "
          f"cap_reached {int(trace.cap_reached)} last_kind {trace.last_kind}",
          file=sys.stderr)
    return 0


# -- argument parsing -----------------------------------------------------------

def _add_scaling(p, multiple=False):
    if multiple:
        p.add_argument("--scaling", type=lambda s: s.split(","), default=["none"],
                       help="comma-separated modes: none, outside, inside, outside-inside, "
                            "inside-outside, repeated, repeated:<pairs>")
    else:
        p.add_argument("--scaling", default="none")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--max-steps", type=int, default=50)
    p.add_argument("--pow2", action=argparse.BooleanOptionalAction, default=True,
                   help="round scaling factors to powers of two (default: on)")
    p.add_argument("--first-step", choices=["O", "I"], default="O")


def _add_dims(p, default=512):
    p.add_argument("--m", type=int, default=default)
    p.add_argument("--k", type=int, default=default)
    p.add_argument("--n", type=int, default=default)
    p.add_argument("--dist", choices=DISTRIBUTIONS, default="u01")
    p.add_argument("--seed", type=int, default=0)


def _add_mode(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--strict", dest="fast", action="store_false", default=False,
                   help="sequential summation order everywhere (default)")
    g.add_argument("--fast", dest="fast", action="store_true",
                   help="BLAS at the base case; bounds are not guaranteed")


def _add_plan(p, levels="1..4"):
    p.add_argument("--algo", default="strassen", help="algorithm reference(s), comma-separated")
    p.add_argument("--plan", help="plan descriptor, overrides --algo/--levels")
    p.add_argument("--levels", type=parse_levels, default=parse_levels(levels))


def build_parser():
    parser = argparse.ArgumentParser(prog="fastmm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an algorithm file exactly")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", help="stability quantities of algorithms or a plan")
    p.add_argument("refs", nargs="*", default=["strassen"])
    p.add_argument("--levels", type=parse_levels, default=[1])
    p.add_argument("--plan", help="analyze a plan descriptor instead")
    p.add_argument("--k", type=int, default=None, help="inner dimension for --plan")
    p.add_argument("--dnc", action="store_true", help="divide-and-conquer summation counts")
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("gen", help="write random A and B")
    _add_dims(p)
    p.add_argument("--out-a", required=True)
    p.add_argument("--out-b", required=True)
    p.add_argument("--text", action="store_true", help="plain-text instead of binary")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("multiply", help="multiply two matrix files")
    p.add_argument("a")
    p.add_argument("b")
    _add_plan(p, levels="1")
    _add_scaling(p)
    _add_mode(p)
    p.add_argument("--out")
    p.add_argument("--check", action="store_true", help="compare with the reference product")
    p.add_argument("--check-finite", action="store_true")
    p.set_defaults(func=cmd_multiply)

    p = sub.add_parser("bench-error", help="error versus reference, CSV")
    _add_dims(p)
    _add_plan(p)
    _add_scaling(p, multiple=True)
    _add_mode(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_bench_error)

    p = sub.add_parser("bench-perf", help="median timings and effective GFLOPS, CSV")
    _add_dims(p)
    _add_plan(p, levels="0,1")
    _add_scaling(p, multiple=True)
    _add_mode(p)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_bench_perf)

    p = sub.add_parser("scale", help="run scaling only and emit the step trace")
    _add_dims(p, default=64)
    p.add_argument("--a")
    p.add_argument("--b")
    _add_scaling(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_scale)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "analyze" and args.plan and args.k is None:
        parser.error("--plan needs --k")
    try:
        return args.func(args)
    except (algo_spec.AlgorithmError, engine.PlanError, scaling.ScalingError,
            ValueError, OSError) as exc:
        print(f"fastmm {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
