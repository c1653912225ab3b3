"""Config-driven command-line front end.

Subcommands
    el            print the Euler-Lagrange expression of the density
    nbc           print the natural boundary conditions (optionally in
                  a boundary chart; linear charts run a closed-form
                  self-test for the beam density)
    prolong       lift the [transformation] section to third-order jets
    solve         solve the free boundary problem, write CSV results
    local-family  trace the one-parameter solution family through an
                  anchored boundary point
    verify        run the built-in verification suites

Exit codes: 0 = ran (including an empty solution set), 1 = config or
parse error, 2 = numeric or internal failure.  Identical config and
seed produce byte-identical CSV output.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from ._tape import compile_tape
from .beam import (BeamProblem, beam_value, linear_chart_nbc_closed_form,
                   local_solution_family, solve_free_sliding_beam)
from .config import ConfigError, ProblemConfig, load_config
from .exprs import ExprFunction, ParseError, parse_expression, \
    print_expression
from .geodesics import (solve_closed_geodesics, solve_strip_geodesics,
                        trace_closed_geodesic_family)
from .geometry import affine_chart, tubular_chart
from .prolongation import PointTransformation, contact_residual, prolong
from .variational import euler_lagrange, natural_boundary_conditions, \
    nbc_in_chart
from .verify import run_all_suites

__all__ = ["main"]

_JET_VARS = ("x", "u", "p", "q", "r")


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def _write_csv(path: str, flavor: str, columns, rows, comments=()) -> None:
    lines = [f"# freebound {flavor} v1",
             f"# columns: {','.join(columns)}"]
    lines.extend(f"# {c}" for c in comments)
    if rows:
        lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    else:
        lines.append("no-solutions-found")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_polyline(path: str, xs, us) -> None:
    _write_csv(path, "curve-samples", ("x", "u"),
               [(x, u) for x, u in zip(xs, us)])


# -- problem-shape validation ------------------------------------------------

def _require_beam(cfg: ProblemConfig) -> None:
    """The order-2 solver handles the bending density κ·q²/2 − ρ(x)·u,
    configured with parameter ``kappa`` and named function ``rho``."""
    if set(cfg.parameters) != {"kappa"} or set(cfg.functions) != {"rho"}:
        raise ConfigError(
            "the order-2 solver expects exactly the parameter 'kappa' and "
            "the named function 'rho'")
    density = parse_expression(cfg.density_text, parameters=("kappa",),
                               functions=("rho",))
    ref = parse_expression("kappa*q^2/2 - rho(x)*u", parameters=("kappa",),
                           functions=("rho",))
    vars_ = _JET_VARS[:4] + ("kappa",)
    got = compile_tape(density, vars_, functions=("rho",))
    want = compile_tape(ref, vars_, functions=("rho",))
    rho = ExprFunction(parse_expression(cfg.functions["rho"]))
    rng = np.random.default_rng(12345)
    for _ in range(20):
        vec = np.append(rng.uniform(-2.0, 2.0, 4), cfg.parameters["kappa"])
        a, b = got.eval_vector(vec, [rho]), want.eval_vector(vec, [rho])
        if abs(a - b) > 1e-9 * max(1.0, abs(b)):
            raise ConfigError(
                "the order-2 solver supports the density "
                "kappa*q^2/2 - rho(x)*u; the configured density differs")


def _require_length(cfg: ProblemConfig) -> None:
    """The order-1 solver handles the arclength density sqrt(1+p^2)."""
    if cfg.parameters or cfg.functions:
        raise ConfigError("the order-1 solver takes no parameters or "
                          "named functions")
    density = parse_expression(cfg.density_text)
    tape = compile_tape(density, ("x", "u", "p"))
    rng = np.random.default_rng(12345)
    for _ in range(20):
        vec = rng.uniform(-3.0, 3.0, 3)
        want = math.hypot(1.0, vec[2])
        if abs(tape.eval_vector(vec) - want) > 1e-9 * want:
            raise ConfigError("the order-1 solver supports the arclength "
                              "density sqrt(1+p^2); the configured density "
                              "differs")


def _generated_pair_seeds(cfg: ProblemConfig, period: float) -> list:
    rng = np.random.default_rng(cfg.seed)
    return [(ta, ta + period * off)
            for ta, off in zip(rng.uniform(0.0, period, cfg.nseeds),
                               rng.uniform(0.25, 0.75, cfg.nseeds))]


def _generated_coeff_seeds(cfg: ProblemConfig) -> list:
    rng = np.random.default_rng(cfg.seed)
    return [tuple(row) for row in rng.uniform(-1.0, 1.0, (cfg.nseeds, 2))]


# -- subcommands ---------------------------------------------------------------

def cmd_el(cfg: ProblemConfig) -> int:
    lag = cfg.build_lagrangian()
    print(print_expression(euler_lagrange(lag)))
    return 0


def _nbc_linear_self_test(cfg: ProblemConfig) -> int:
    """Compare the pipeline NBC pair in random linear charts against the
    closed-form reference, for the beam density."""
    _require_beam(cfg)
    lag = cfg.build_lagrangian()
    ref1, ref2 = linear_chart_nbc_closed_form()
    print("reference pair in the linear chart "
          "x = e + a*xb + b*ub, u = f + c*xb + d*ub:")
    print("  first  =", print_expression(ref1))
    print("  second =", print_expression(ref2))
    rho = ExprFunction(parse_expression(cfg.functions["rho"]))
    kappa = cfg.parameters["kappa"]
    ref_vars = _JET_VARS + ("a", "b", "c", "d", "e", "f", "kappa")
    t_ref1 = compile_tape(ref1, ref_vars, functions=("rho",))
    t_ref2 = compile_tape(ref2, ref_vars, functions=("rho",))
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    xv, uv = parse_expression("x"), parse_expression("u")
    for _ in range(5):
        while True:
            a, b, c, d = rng.uniform(-1.5, 1.5, 4)
            if abs(a * d - b * c) >= 0.3:
                break
        e, f = rng.uniform(-0.5, 0.5, 2)
        a, b, c, d, e, f = (float(v) for v in (a, b, c, d, e, f))
        text_x = f"({e!r}) + ({a!r})*x + ({b!r})*u"
        text_u = f"({f!r}) + ({c!r})*x + ({d!r})*u"
        chart = PointTransformation(parse_expression(text_x),
                                    parse_expression(text_u))
        pair = nbc_in_chart(lag, prolong(chart))
        t1 = compile_tape(pair.first, _JET_VARS + ("kappa",),
                          functions=("rho",))
        t2 = compile_tape(pair.second, _JET_VARS + ("kappa",),
                          functions=("rho",))
        for _ in range(40):
            jet = rng.uniform(-1.0, 1.0, 5)
            if abs(a + b * jet[2]) < 0.2:       # stay off the chart pole
                continue
            vec = np.append(jet, kappa)
            ref_vec = np.concatenate([jet, [a, b, c, d, e, f, kappa]])
            for tape, tref in ((t1, t_ref1), (t2, t_ref2)):
                got = tape.eval_vector(vec, [rho])
                want = tref.eval_vector(ref_vec, [rho])
                worst = max(worst, abs(got - want) / max(1.0, abs(want)))
    ok = worst <= 1e-8
    print(f"linear-chart self-test: {'PASS' if ok else 'FAIL'} "
          f"(worst relative mismatch {worst:.3e} over 5 charts x 40 jets)")
    return 0 if ok else 2


def cmd_nbc(cfg: ProblemConfig, chart_kind: "str | None") -> int:
    lag = cfg.build_lagrangian()
    if chart_kind is None:
        pair = natural_boundary_conditions(lag)
        print(print_expression(pair.first))
        print(print_expression(pair.second))
        return 0
    if chart_kind == "affine" and cfg.order == 2 and \
            set(cfg.parameters) == {"kappa"} and set(cfg.functions) == {"rho"}:
        return _nbc_linear_self_test(cfg)
    gamma = cfg.build_curve()
    anchor = cfg.anchor if cfg.anchor is not None else 0.0
    chart = (affine_chart(gamma, anchor) if chart_kind == "affine"
             else tubular_chart(gamma, anchor))
    pair = nbc_in_chart(lag, chart.prolonged)
    print(f"chart: {chart_kind} at t0 = {_fmt(anchor)}")
    print(print_expression(pair.first))
    print(print_expression(pair.second))
    return 0


def cmd_prolong(cfg: ProblemConfig) -> int:
    if cfg.transformation is None:
        raise ConfigError("the prolong command needs a [transformation] "
                          "section with xbar and ubar")
    xbar = parse_expression(cfg.transformation["xbar"])
    ubar = parse_expression(cfg.transformation["ubar"])
    pro = prolong(PointTransformation(xbar, ubar), seed=cfg.seed)
    print("F =", print_expression(pro.F))
    print("G =", print_expression(pro.G))
    print("H =", print_expression(pro.H))
    res_dx, _ = contact_residual(pro)
    tape = compile_tape(res_dx, ("x", "u", "p"))
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(30):
        vec = np.array([rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8),
                        rng.uniform(-2.0, 2.0)])
        worst = max(worst, abs(tape.eval_vector(vec)))
    ok = worst <= 1e-8
    print(f"contact self-test: {'PASS' if ok else 'FAIL'} "
          f"(worst residual {worst:.3e} over 30 jets)")
    return 0 if ok else 2


_BEAM_COLUMNS = ("t_a", "t_b", "c0", "c1", "c2", "c3",
                 "res_inc_a", "res_nbc1_a", "res_nbc2_a",
                 "res_inc_b", "res_nbc1_b", "res_nbc2_b", "nullity")
_CHORD_COLUMNS = ("t_a", "t_b", "x_a", "u_a", "x_b", "u_b", "length",
                  "res_a", "res_b", "nullity")


def _beam_problem(cfg: ProblemConfig) -> BeamProblem:
    _require_beam(cfg)
    rho = parse_expression(cfg.functions["rho"])
    domain = (cfg.interval if cfg.domain_kind == "interval"
              else cfg.build_curve())
    return BeamProblem(cfg.parameters["kappa"], rho, domain)


def _solve_beam(cfg: ProblemConfig, out: str) -> int:
    prob = _beam_problem(cfg)
    u0 = prob.particular(0.0)
    if prob.interval is not None:
        seeds = cfg.seeds or _generated_coeff_seeds(cfg)
        report = solve_free_sliding_beam(prob, None, seeds, tol=cfg.tol)
    else:
        seeds = cfg.seeds or _generated_pair_seeds(cfg, prob.curve.period)
        report = solve_free_sliding_beam(prob, prob.curve, seeds,
                                         tol=cfg.tol, chart_kind=cfg.chart)
    for msg in report.messages:
        print(msg)
    sols = sorted(report.solutions, key=lambda s: (s.t_a, s.t_b))
    rows = []
    for s in sols:
        res = s.residual_norms
        if len(res) == 4:               # strip rows: no incidence residual
            res = (0.0, res[0], res[1], 0.0, res[2], res[3])
        rows.append((s.t_a, s.t_b, *s.coeffs.as_array(), *res, s.nullity))
    comments = []
    if report.empty_certified:
        comments.append("certified empty: " + report.certificate)
    path = os.path.join(out, "solutions.csv")
    _write_csv(path, "beam-solutions", _BEAM_COLUMNS, rows, comments)
    print(f"wrote {len(rows)} solution(s) to {path}")
    for i, s in enumerate(sols):
        if prob.interval is not None:
            xa, xb = prob.interval
        else:
            xa = float(prob.curve.point(s.t_a)[0])
            xb = float(prob.curve.point(s.t_b)[0])
        xs = np.linspace(xa, xb, 200)
        us = [beam_value(s.coeffs, u0, float(x), 0) for x in xs]
        _write_polyline(os.path.join(out, f"solution_{i:03d}.csv"), xs, us)
    return 0


def _solve_length(cfg: ProblemConfig, out: str) -> int:
    _require_length(cfg)
    path = os.path.join(out, "solutions.csv")
    if cfg.domain_kind == "curve":
        gamma = cfg.build_curve()
        seeds = cfg.seeds or _generated_pair_seeds(cfg, gamma.period)
        report = solve_closed_geodesics(gamma, seeds, tol=cfg.tol)
        for msg in report.messages:
            print(msg)
        sols = sorted(report.solutions, key=lambda s: (s.t_a, s.t_b))
        rows = [(s.t_a, s.t_b, *s.endpoint_a, *s.endpoint_b, s.length,
                 *s.residuals, s.nullity) for s in sols]
        _write_csv(path, "chord-solutions", _CHORD_COLUMNS, rows)
        print(f"wrote {len(rows)} solution(s) to {path}")
        for i, s in enumerate(sols):
            ss = np.linspace(0.0, 1.0, 200)
            ax, au = s.endpoint_a
            bx, bu = s.endpoint_b
            _write_polyline(os.path.join(out, f"solution_{i:03d}.csv"),
                            ax + ss * (bx - ax), au + ss * (bu - au))
        family = next((s for s in sols if s.nullity >= 1), None)
        if family is not None:
            trace = trace_closed_geodesic_family(
                gamma, (family.t_a, family.t_b), step=cfg.step,
                max_points=cfg.max_points, tol=cfg.tol)
            fpath = os.path.join(out, "family.csv")
            _write_csv(fpath, "chord-family", ("t_a", "t_b"),
                       [tuple(row) for row in trace.points],
                       (f"termination: {trace.termination}",))
            print(f"family trace ({len(trace.points)} points, "
                  f"{trace.termination}) written to {fpath}")
        return 0
    a, b = cfg.interval
    seeds = cfg.seeds or _generated_coeff_seeds(cfg)
    report = solve_strip_geodesics(a, b, seeds, tol=cfg.tol)
    for msg in report.messages:
        print(msg)
    sols = sorted(report.solutions, key=lambda s: (s.c0, s.c1))
    rows = []
    for s in sols:
        ua, ub = s.c0 + s.c1 * a, s.c0 + s.c1 * b
        rows.append((ua, ub, a, ua, b, ub, math.hypot(b - a, ub - ua),
                     *s.residuals, s.nullity))
    _write_csv(path, "chord-solutions", _CHORD_COLUMNS, rows)
    print(f"wrote {len(rows)} solution(s) to {path}")
    for i, (ua, ub) in enumerate((r[0], r[1]) for r in rows):
        xs = np.linspace(a, b, 200)
        _write_polyline(os.path.join(out, f"solution_{i:03d}.csv"),
                        xs, ua + (xs - a) * (ub - ua) / (b - a))
    return 0


def cmd_solve(cfg: ProblemConfig) -> int:
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    if cfg.order == 2:
        return _solve_beam(cfg, out)
    return _solve_length(cfg, out)


def cmd_local_family(cfg: ProblemConfig) -> int:
    if cfg.domain_kind != "curve":
        raise ConfigError("local-family needs a curve domain")
    if cfg.anchor is None:
        raise ConfigError("local-family needs [solver] anchor = t0")
    prob = _beam_problem(cfg)
    gamma = prob.curve
    grid = cfg.grid if cfg.grid else list(np.linspace(-2.0, 2.0, 9))
    fam = local_solution_family(prob, gamma, cfg.anchor, grid,
                                step=cfg.step, max_points=cfg.max_points,
                                tol=cfg.tol)
    print(f"family through t0 = {_fmt(cfg.anchor)}: {len(fam.points)} "
          f"points, termination {fam.termination}")
    if fam.message:
        print(fam.message)
    rows = []
    for i in range(len(fam.points)):
        cf = fam.coefficients(i, prob, gamma)
        nullity = int(fam.nullities[i]) if fam.nullities is not None else -1
        rows.append((*cf.as_array(), nullity))
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "family.csv")
    _write_csv(path, "beam-local-family", ("c0", "c1", "c2", "c3", "nullity"),
               rows, (f"anchor t0 = {_fmt(cfg.anchor)}",
                      f"termination: {fam.termination}"))
    print(f"wrote {len(rows)} family point(s) to {path}")
    return 0


def cmd_verify(seed: int) -> int:
    results = run_all_suites(seed)
    ok = True
    for name, passed, detail in results:
        ok = ok and passed
        print(f"{name}: {'PASS' if passed else 'FAIL'} — {detail}")
    return 0 if ok else 2


# -- entry point ---------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freebound",
        description="Free boundary values variational problems on planar "
                    "domains: symbolic derivations and numeric solvers.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_config in (("el", True), ("nbc", True),
                               ("prolong", True), ("solve", True),
                               ("local-family", True), ("verify", False)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=needs_config,
                       help="problem configuration file")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="random seed (overrides "
                       "config)")
        p.add_argument("--tol", type=float, help="solver tolerance "
                       "(overrides config)")
        p.add_argument("--chart", choices=("affine", "tubular"),
                       help="boundary chart kind")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args.seed if args.seed is not None else 0)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.tol is not None:
            cfg.tol = args.tol
        if args.out is not None:
            cfg.out_dir = args.out
        if args.chart is not None and args.command in ("solve",
                                                       "local-family"):
            cfg.chart = args.chart
        if args.command == "el":
            return cmd_el(cfg)
        if args.command == "nbc":
            return cmd_nbc(cfg, args.chart)
        if args.command == "prolong":
            return cmd_prolong(cfg)
        if args.command == "solve":
            return cmd_solve(cfg)
        return cmd_local_family(cfg)
    except (ConfigError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:                      # numeric/internal failures
        print(f"internal error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
