"""Timing comparison of the two tape evaluation kernels.

Compiles a few representative expressions (small, medium, and a large
chart-pulled boundary condition) and times scalar and batch evaluation
under both the pure-Python kernel and the compiled one, checking on the
way that they produce identical values.

    python3 benchmarks/bench_eval.py [--scalar-evals N] [--batch-rows N]
"""

import argparse
import math
import time

import numpy as np

from freebound import (ExprFunction, Lagrangian, PointTransformation,
                       backend_name, beam_lagrangian, compile_tape,
                       euler_lagrange, natural_boundary_conditions,
                       parse_expression, prolong, pullback_lagrangian)
from freebound import _tapepure

try:
    from freebound import _tapecore
except ImportError:
    _tapecore = None

JET_VARS = ("x", "u", "p", "q", "r", "s", "kappa")


def check_agreement(a, b, name):
    """The kernels promise roundoff-level agreement, not bit identity:
    the pure batch path vectorizes per instruction, so its power and
    transcendental calls may differ from the compiled per-row loop by
    an ulp or two."""
    a = np.atleast_1d(np.asarray(a))
    b = np.atleast_1d(np.asarray(b))
    rel = np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-30)
    if rel.max() > 1e-13:
        raise RuntimeError(f"kernels disagree on {name}: max rel "
                           f"{rel.max():.3e}")


def build_cases():
    """(name, tape, argument vector, bound functions) quadruples."""
    rho = ExprFunction(parse_expression("1 + sin(x)"))
    cases = []

    el = euler_lagrange(beam_lagrangian())
    cases.append(("beam euler-lagrange",
                  compile_tape(el, JET_VARS, functions=("rho",)), [rho]))

    arc = euler_lagrange(Lagrangian(1, parse_expression("(1 + p^2)^(1/2)")))
    cases.append(("arclength euler-lagrange",
                  compile_tape(arc, JET_VARS, functions=()), []))

    chart = PointTransformation(parse_expression("x + u^2/10 + x*u/7"),
                                parse_expression("u - x^2/20"))
    pair = natural_boundary_conditions(
        pullback_lagrangian(beam_lagrangian(), prolong(chart)))
    cases.append(("chart-pulled second condition",
                  compile_tape(pair.second, JET_VARS, functions=("rho",)),
                  [rho]))
    return cases


def time_scalar(kernel, tape, vec, funcs, evals, repeats):
    scratch = np.empty(len(tape.code))
    args = (tape.code, tape.ia, tape.ib, tape.ic, tape.consts, vec, funcs,
            scratch)
    value = None
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(evals):
            status, _, value = kernel.eval_scalar(*args)
        best = min(best, time.perf_counter() - t0)
        if status:
            raise RuntimeError(f"kernel reported status {status}")
    return best / evals, value


def time_batch(kernel, tape, table, funcs, repeats):
    scratch = np.empty(len(tape.code))
    out = np.empty(table.shape[0])
    args = (tape.code, tape.ia, tape.ib, tape.ic, tape.consts, table, out,
            funcs, scratch)
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        status, _, _ = kernel.eval_batch(*args)
        best = min(best, time.perf_counter() - t0)
        if status:
            raise RuntimeError(f"kernel reported status {status}")
    return best / table.shape[0], out.copy()


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scalar-evals", type=int, default=20000,
                    help="scalar evaluations per timing run (default 20000)")
    ap.add_argument("--batch-rows", type=int, default=200000,
                    help="rows per batch timing run (default 200000)")
    ap.add_argument("--repeats", type=int, default=3,
                    help="timing repeats, best is kept (default 3)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    kernels = [("pure", _tapepure)]
    if _tapecore is not None:
        kernels.append(("compiled", _tapecore))
    else:
        print("note: compiled kernel not built; timing the pure kernel only")
    print(f"active package backend: {backend_name()}")

    rng = np.random.default_rng(args.seed)
    vec = np.empty(len(JET_VARS))
    vec[:-1] = rng.uniform(-0.5, 0.5, len(JET_VARS) - 1)
    vec[-1] = 1.5  # kappa

    print(f"\nscalar evaluation ({args.scalar_evals} calls, best of "
          f"{args.repeats}):")
    header = f"{'tape':34s} {'instrs':>6s}"
    for name, _ in kernels:
        header += f" {name + ' ns/call':>16s}"
    if len(kernels) == 2:
        header += f" {'speedup':>8s}"
    print(header)
    cases = build_cases()
    for name, tape, funcs in cases:
        row = f"{name:34s} {len(tape):6d}"
        per = {}
        val = {}
        for kname, kernel in kernels:
            per[kname], val[kname] = time_scalar(
                kernel, tape, vec, funcs, args.scalar_evals, args.repeats)
            row += f" {per[kname] * 1e9:16.0f}"
        if len(kernels) == 2:
            check_agreement(val["pure"], val["compiled"], name)
            row += f" {per['pure'] / per['compiled']:7.1f}x"
        print(row)

    print(f"\nbatch evaluation ({args.batch_rows} rows, best of "
          f"{args.repeats}):")
    print(header.replace("ns/call", " ns/row"))
    table = np.empty((args.batch_rows, len(JET_VARS)))
    table[:, :-1] = rng.uniform(-0.5, 0.5, (args.batch_rows, len(JET_VARS) - 1))
    table[:, -1] = 1.5
    for name, tape, funcs in cases:
        row = f"{name:34s} {len(tape):6d}"
        per = {}
        out = {}
        for kname, kernel in kernels:
            per[kname], out[kname] = time_batch(
                kernel, tape, table, funcs, args.repeats)
            row += f" {per[kname] * 1e9:16.0f}"
        if len(kernels) == 2:
            check_agreement(out["pure"], out["compiled"], name)
            row += f" {per['pure'] / per['compiled']:7.1f}x"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
