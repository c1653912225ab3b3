"""The free-sliding Bernoulli beam.

The beam density is L = κ q²/2 − ρ(x) u, whose Euler-Lagrange equation
κ u⁗ = ρ has the general solution

    u(x) = u₀(x) + c₃x³ + c₂x² + c₁x + c₀,

with u₀ a fixed particular solution (here normalized by a fourfold zero
at a base point, computed by iterated quadrature of ρ/κ).  Endpoints
slide freely on the boundary Γ, so a critical beam satisfies, at each
endpoint, the incidence condition plus the pair of natural boundary
conditions of the density pulled back to a boundary-adapted chart.

This module provides the particular solution, the coefficient
reduction that enforces incidence and the first chart condition at one
endpoint, conditioned endpoint NBC residuals in affine or tubular
charts, continuation of the local one-parameter family at a fixed
anchor, and the full 6-unknown sliding solver (with an exact
linear-algebra path for the flat strip, including an emptiness
certificate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._tape import compile_tape
from .exprs import (
    Expr,
    ExprFunction,
    ExpressionError,
    JetPoint,
    const,
    free_symbols,
    function_names,
    parse_expression,
    partial_derivative,
    substitute,
    var,
)
from .geometry import (
    BoundaryCurve,
    SampledCurve,
    chart_transformation,
    is_admissible,
)
from .prolongation import ChartUnsuitableError, prolong
from .solve import ContinuationPath, NewtonResult, ResidualSystem, \
    SolverError, newton_solve, quadrature, trace_family
from .variational import Lagrangian, nbc_in_chart

__all__ = [
    "BeamError",
    "NonCrossingError",
    "BeamProblem",
    "BeamCoefficients",
    "ParticularSolution",
    "SlidingSolution",
    "SolveReport",
    "LocalFamily",
    "particular_solution",
    "reduced_coefficients",
    "beam_value",
    "endpoint_nbc_residual",
    "local_solution_family",
    "solve_free_sliding_beam",
    "beam_lagrangian",
    "linear_chart_nbc_closed_form",
]


class BeamError(ExpressionError):
    pass


class NonCrossingError(BeamError):
    """The beam graph does not meet the boundary near the requested
    anchor (its endpoint falls outside the chart patch)."""


def beam_lagrangian() -> Lagrangian:
    """The beam density κ q²/2 − ρ(x) u with symbolic κ and ρ."""
    density = parse_expression("kappa*q^2/2 - rho(x)*u",
                               parameters=("kappa",), functions=("rho",))
    return Lagrangian(order=2, density=density,
                      parameters=("kappa",), functions=("rho",))


@dataclass(frozen=True)
class BeamCoefficients:
    c0: float
    c1: float
    c2: float
    c3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.c0, self.c1, self.c2, self.c3])


class BeamProblem:
    """κ, load ρ (an expression in x) and the domain: either a flat
    strip given as an interval (a, b) — walls at x=a and x=b — or a
    closed :class:`BoundaryCurve`."""

    def __init__(self, kappa: float, rho: Expr, domain):
        if kappa == 0.0 or not math.isfinite(kappa):
            raise BeamError("kappa must be a nonzero finite number")
        extra = free_symbols(rho) - {"x"}
        if extra or function_names(rho):
            raise BeamError("rho must be an expression in x alone")
        self.kappa = float(kappa)
        self.rho = rho
        if isinstance(domain, BoundaryCurve):
            self.curve: "BoundaryCurve | None" = domain
            self.interval: "tuple | None" = None
        else:
            a, b = float(domain[0]), float(domain[1])
            if not a < b:
                raise BeamError("interval domain needs a < b")
            self.curve = None
            self.interval = (a, b)
        self.rho_function = ExprFunction(rho)
        self._chart_cache: dict = {}
        self._u0_cache: dict = {}

    def particular(self, x0: float = 0.0) -> "ParticularSolution":
        got = self._u0_cache.get(x0)
        if got is None:
            got = self._u0_cache[x0] = ParticularSolution(
                self.rho, self.kappa, x0)
        return got


class ParticularSolution:
    """u₀ with κ u₀⁗ = ρ and u₀ = u₀' = u₀'' = u₀''' = 0 at x₀.

    Realized by the kernel quadratures
    u₀⁽ᵏ⁾(x) = ∫ₓ₀ˣ (x−t)^(3−k)/(3−k)! · ρ(t)/κ dt for k ≤ 3."""

    def __init__(self, rho: Expr, kappa: float, x0: float,
                 quad_points: int = 1024):
        self.x0 = float(x0)
        self.kappa = float(kappa)
        self._rho_tape = compile_tape(rho, ("x",))
        self._zero = _is_const_zero(rho)
        self._n = int(quad_points)
        self._cache: dict = {}

    def eval(self, x: float, k: int = 0) -> float:
        if not 0 <= k <= 4:
            raise BeamError("derivative order must be 0..4")
        if self._zero:
            return 0.0
        x = float(x)
        if k == 4:
            return self._rho_tape.eval_vector(np.array([x])) / self.kappa
        key = (x, k)
        got = self._cache.get(key)
        if got is not None:
            return got
        m = 3 - k
        fact = math.factorial(m)

        def integrand(ts: np.ndarray) -> np.ndarray:
            rho_vals = self._rho_tape.eval_many(ts.reshape(-1, 1))
            return (x - ts) ** m / fact * rho_vals / self.kappa

        val = quadrature(integrand, self.x0, x, self._n) if x != self.x0 else 0.0
        if len(self._cache) > 4096:
            self._cache.clear()
        self._cache[key] = val
        return val


def _is_const_zero(e: Expr) -> bool:
    from .exprs import Const
    return isinstance(e, Const) and e.value == 0.0


def particular_solution(prob: BeamProblem, x0: float) -> ParticularSolution:
    return ParticularSolution(prob.rho, prob.kappa, x0)


def reduced_coefficients(xp: float, up: float, c1: float, c3: float,
                         u0: ParticularSolution) -> tuple:
    """(c₂, c₀) making u pass through (xp, up) with u″(xp) = 0.

    Substituting the vanishing-second-derivative condition and the
    incidence condition into the cubic leaves (c₁, c₃) free:
    c₂ = −3 xp c₃ − u₀″(xp)/2 and
    c₀ = (2 up − 2 xp c₁ + 4 xp³ c₃ + xp² u₀″(xp) − 2 u₀(xp)) / 2."""
    d2 = u0.eval(xp, 2)
    c2 = -3.0 * xp * c3 - 0.5 * d2
    c0 = 0.5 * (2.0 * up - 2.0 * xp * c1 + 4.0 * xp ** 3 * c3
                + xp ** 2 * d2 - 2.0 * u0.eval(xp, 0))
    return c2, c0


def beam_value(coeffs: BeamCoefficients, u0: ParticularSolution,
               x: float, k: int = 0) -> float:
    """k-th derivative of u = u₀ + c₃x³ + c₂x² + c₁x + c₀ at x."""
    c = coeffs
    x = float(x)
    poly = {
        0: c.c3 * x ** 3 + c.c2 * x ** 2 + c.c1 * x + c.c0,
        1: 3.0 * c.c3 * x ** 2 + 2.0 * c.c2 * x + c.c1,
        2: 6.0 * c.c3 * x + 2.0 * c.c2,
        3: 6.0 * c.c3,
        4: 0.0,
    }[k]
    return poly + u0.eval(x, k)


def _beam_jet(coeffs: BeamCoefficients, u0: ParticularSolution,
              x: float) -> JetPoint:
    return JetPoint(x, beam_value(coeffs, u0, x, 0),
                    beam_value(coeffs, u0, x, 1),
                    beam_value(coeffs, u0, x, 2),
                    beam_value(coeffs, u0, x, 3))


# ---------------------------------------------------------------------------
# chart endpoint residuals


class _ChartResidual:
    """Conditioned chart NBC residual evaluator for one (curve, kind).

    Compiles, once, the NBC pair of the beam density pulled back
    through the anchor-parametrized chart family, divided by the
    corresponding top-order partials (∂first/∂q and ∂second/∂r, both
    nonvanishing on a valid chart) — a conditioning that preserves the
    zero set while keeping residual magnitudes O(jet)."""

    _VARS = ("x", "u", "p", "q", "r", "t0", "kappa")

    def __init__(self, gamma: BoundaryCurve, kind: str):
        self.gamma = gamma
        self.kind = kind
        if kind == "tubular":
            delta = gamma.reach_estimate()
            if not math.isfinite(delta):
                delta = min(1.0, gamma.period / 4.0)
            self.delta = delta
        else:
            self.delta = math.inf
        phi = chart_transformation(gamma, kind, None, delta=min(self.delta, 1e6))
        self.pro = prolong(phi)
        pair = nbc_in_chart(beam_lagrangian(), self.pro)
        first_q = partial_derivative(pair.first, "q")
        second_r = partial_derivative(pair.second, "r")
        from .exprs import div
        self._res1 = compile_tape(div(pair.first, first_q), self._VARS,
                                  functions=("rho",))
        self._res2 = compile_tape(div(pair.second, second_r), self._VARS,
                                  functions=("rho",))
        self.pair = pair

    def eval(self, t: float, jet: JetPoint, kappa: float,
             rho_function) -> tuple:
        chart_jet = self.pro.invert_jet(jet, params={"t0": t}, seed=(0.0, 0.0))
        if self.kind == "tubular":
            lim = self.delta * (1.0 + 1e-9)
            if abs(chart_jet.x) > lim or abs(chart_jet.u) > lim:
                raise NonCrossingError(
                    f"beam endpoint ({jet.x:g}, {jet.u:g}) falls outside the "
                    f"chart patch at anchor t={t:g}")
        vec = np.array([chart_jet.x, chart_jet.u, chart_jet.p, chart_jet.q,
                        chart_jet.r, t, kappa])
        funcs = [rho_function]
        return (self._res1.eval_vector(vec, funcs),
                self._res2.eval_vector(vec, funcs))


def _chart_residual(prob: BeamProblem, gamma: BoundaryCurve,
                    kind: str) -> _ChartResidual:
    key = (gamma, kind)
    got = prob._chart_cache.get(key)
    if got is None:
        got = prob._chart_cache[key] = _ChartResidual(gamma, kind)
    return got


def endpoint_nbc_residual(prob: BeamProblem, gamma: BoundaryCurve, t: float,
                          coeffs: BeamCoefficients, chart_kind: str = "tubular",
                          u0: "ParticularSolution | None" = None) -> tuple:
    """Conditioned chart NBC pair of the beam at the endpoint γ(t).

    The beam's third jet at abscissa X(t) is pulled into the chart
    anchored at t and the two boundary conditions are evaluated there;
    the first component vanishes iff u″ = 0 at the endpoint.  The
    particular solution defaults to the x₀ = 0 gauge."""
    if u0 is None:
        u0 = prob.particular(0.0)
    cr = _chart_residual(prob, gamma, chart_kind)
    xe = float(gamma.point(t)[0])
    jet = _beam_jet(coeffs, u0, xe)
    return cr.eval(gamma._wrap(t), jet, prob.kappa, prob.rho_function)


# ---------------------------------------------------------------------------
# local one-parameter family at a fixed anchor


@dataclass
class LocalFamily:
    """Continuation trace of the one-parameter solution family through
    a fixed boundary point, in the reduced coordinates (c₁, c₃)."""

    anchor: float
    points: np.ndarray            # shape (N, 2): rows (c1, c3)
    termination: str
    message: str
    nullities: "np.ndarray | None" = None   # sampled full-residual nullities

    def coefficients(self, i: int, prob: BeamProblem,
                     gamma: BoundaryCurve,
                     u0: "ParticularSolution | None" = None) -> BeamCoefficients:
        if u0 is None:
            u0 = prob.particular(0.0)
        xp, up = gamma.point(self.anchor)
        c1, c3 = self.points[i]
        c2, c0 = reduced_coefficients(float(xp), float(up), c1, c3, u0)
        return BeamCoefficients(c0, c1, c2, c3)


def _full_residual_nullity(prob: BeamProblem, gamma: BoundaryCurve, t0: float,
                           coeffs: BeamCoefficients,
                           u0: ParticularSolution) -> int:
    """Nullity of the Jacobian of [incidence, res1, res2] at fixed t₀
    with respect to (c₀..c₃)."""
    xp, up = gamma.point(t0)
    xp, up = float(xp), float(up)

    def res(cvec: np.ndarray) -> np.ndarray:
        cf = BeamCoefficients(*cvec)
        inc = beam_value(cf, u0, xp, 0) - up
        r1, r2 = endpoint_nbc_residual(prob, gamma, t0, cf, "affine", u0)
        return np.array([inc, r1, r2])

    c = coeffs.as_array()
    J = np.empty((3, 4))
    f0 = res(c)
    for j in range(4):
        h = 1e-7 * (1.0 + abs(c[j]))
        cp = c.copy()
        cp[j] += h
        J[:, j] = (res(cp) - f0) / h
    return _nullity(J)


def local_solution_family(prob: BeamProblem, gamma: BoundaryCurve, t0: float,
                          grid, *, step: float = 0.05, max_points: int = 2000,
                          tol: float = 1e-10,
                          box_radius: float = 8.0) -> LocalFamily:
    """Trace the solutions through γ(t₀) in the (c₁, c₃) plane.

    Incidence and the first chart condition are enforced exactly by
    :func:`reduced_coefficients` (in the affine chart at t₀ the first
    condition is equivalent to u″ = 0 at the endpoint), leaving a
    single equation — the second chart condition — in (c₁, c₃).  The
    zero set is traced by pseudo-arclength continuation seeded from the
    first grid entry that converges.  An empty trace is a reported
    outcome, not an exception."""
    u0 = prob.particular(0.0)
    xp, up = gamma.point(t0)
    xp, up = float(xp), float(up)

    def res(y: np.ndarray) -> np.ndarray:
        c2, c0 = reduced_coefficients(xp, up, y[0], y[1], u0)
        cf = BeamCoefficients(c0, y[0], c2, y[1])
        _, r2 = endpoint_nbc_residual(prob, gamma, t0, cf, "affine", u0)
        return np.array([r2])

    system = ResidualSystem(res, n=2, m=1,
                            box=((-box_radius, box_radius),
                                 (-box_radius, box_radius)))
    seeds = []
    for entry in grid:
        arr = np.atleast_1d(np.asarray(entry, dtype=float))
        seeds.append(np.array([arr[0], arr[1] if arr.size > 1 else 0.0]))
    path = None
    for seed in seeds:
        try:
            path = trace_family(system, seed, step=step,
                                max_points=max_points, tol=tol)
        except SolverError:
            continue
        if path.termination != "empty":
            break
    if path is None or path.termination == "empty" or len(path.points) == 0:
        return LocalFamily(t0, np.zeros((0, 2)), "empty",
                           "no seed converged onto the family")
    if path.termination != "closed":
        # walk the other way from the same seed and splice the halves
        back = trace_family(system, path.points[0], step=step,
                            max_points=max_points, tol=tol, direction=-1)
        if len(back.points) > 1:
            path = ContinuationPath(
                np.vstack([back.points[:0:-1], path.points]),
                np.vstack([back.tangents[:0:-1], path.tangents]),
                np.concatenate([back.steps[::-1], path.steps]),
                path.termination,
                (path.message + "; backward: " + back.termination).strip("; "))
    pts = np.asarray(path.points)
    nullities = np.array([
        _full_residual_nullity(prob, gamma, t0,
                               BeamCoefficients(*_expand(xp, up, y, u0)), u0)
        for y in pts])
    # The trace can run against or across singular points of the family —
    # typically where the beam turns tangent to the boundary and the
    # solution set stops being locally one-dimensional.  Keep the longest
    # contiguous regular (nullity-1) run; the rest is outside the regime
    # where the family is a curve.
    message = path.message
    regular = nullities == 1
    if not regular.any():
        return LocalFamily(t0, pts, path.termination,
                           (message + "; no regular points").strip("; "),
                           nullities)
    best_lo = best_hi = -1
    run_lo = None
    for i, ok in enumerate(np.append(regular, False)):
        if ok and run_lo is None:
            run_lo = i
        elif not ok and run_lo is not None:
            if i - run_lo > best_hi - best_lo:
                best_lo, best_hi = run_lo, i
            run_lo = None
    if best_lo > 0 or best_hi < len(pts):
        dropped = len(pts) - (best_hi - best_lo)
        message = (message +
                   f"; kept the longest regular run, dropped {dropped} "
                   "singular point(s)").strip("; ")
        pts = pts[best_lo:best_hi]
        nullities = nullities[best_lo:best_hi]
    return LocalFamily(t0, pts, path.termination, message, nullities)


def _expand(xp: float, up: float, y: np.ndarray,
            u0: ParticularSolution) -> tuple:
    c2, c0 = reduced_coefficients(xp, up, y[0], y[1], u0)
    return (c0, y[0], c2, y[1])


# ---------------------------------------------------------------------------
# the full sliding solver


@dataclass(frozen=True)
class SlidingSolution:
    t_a: float
    t_b: float
    coeffs: BeamCoefficients
    residual_norms: tuple
    nullity: int

    def max_residual(self) -> float:
        return max(abs(r) for r in self.residual_norms)


@dataclass
class SolveReport:
    solutions: list
    messages: list = field(default_factory=list)
    empty_certified: bool = False
    certificate: str = ""


_MIN_SEPARATION = 1e-3      # times the period


def _flat_strip_solve(prob: BeamProblem, seeds, tol: float) -> SolveReport:
    """Exact path for the strip [a,b]×R: the flat NBCs u″ = u‴ = 0 at
    both walls are affine in the coefficients, so emptiness and the
    solution manifold come from linear algebra, not iteration."""
    a, b = prob.interval
    u0 = prob.particular(0.0)
    # rows: u''(a), u'''(a), u''(b), u'''(b);  unknowns (c2, c3)
    A = np.array([[2.0, 6.0 * a], [0.0, 6.0], [2.0, 6.0 * b], [0.0, 6.0]])
    rhs = -np.array([u0.eval(a, 2), u0.eval(a, 3),
                     u0.eval(b, 2), u0.eval(b, 3)])
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    resid = A @ sol - rhs
    scale = 1.0 + float(np.max(np.abs(rhs)))
    report = SolveReport(solutions=[])
    if np.max(np.abs(resid)) > 1e-9 * scale:
        # The two gauge-independent obstructions: u'''(a)=u'''(b)=0 forces
        # the integrated load to vanish, and the pair of u''-conditions then
        # forces its first moment about b to vanish as well.
        load_integral = prob.kappa * (u0.eval(b, 3) - u0.eval(a, 3))
        load_moment = prob.kappa * (u0.eval(b, 2) - u0.eval(a, 2)
                                    - u0.eval(a, 3) * (b - a))
        report.empty_certified = True
        report.certificate = (
            "the four wall conditions u''=u'''=0 are linearly incompatible: "
            f"integrated load = {load_integral:.6g}, first load moment = "
            f"{load_moment:.6g} (both must vanish); least-squares residual "
            f"{np.max(np.abs(resid)):.3e}")
        report.messages.append("no solutions: " + report.certificate)
        return report
    c2s, c3s = float(sol[0]), float(sol[1])
    seen = []
    for seed in seeds:
        arr = np.atleast_1d(np.asarray(seed, dtype=float))
        c0, c1 = (float(arr[0]), float(arr[1])) if arr.size >= 2 else (float(arr[0]), 0.0)
        cf = BeamCoefficients(c0, c1, c2s, c3s)
        key = np.array([c0, c1])
        if any(np.max(np.abs(key - s)) <= 1e-6 for s in seen):
            continue
        seen.append(key)
        res = (beam_value(cf, u0, a, 2), beam_value(cf, u0, a, 3),
               beam_value(cf, u0, b, 2), beam_value(cf, u0, b, 3))
        report.solutions.append(SlidingSolution(
            t_a=beam_value(cf, u0, a, 0), t_b=beam_value(cf, u0, b, 0),
            coeffs=cf, residual_norms=tuple(float(r) for r in res),
            nullity=2))
    report.messages.append(
        f"flat strip: affine solution family (c2={c2s:.12g}, c3={c3s:.12g}), "
        "free (c0, c1); nullity 2")
    return report


def _curve_seed_vector(gamma: BoundaryCurve, u0: ParticularSolution,
                       seed) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(seed, dtype=float))
    if arr.size == 6:
        return arr.astype(float)
    if arr.size != 2:
        raise BeamError("curve-domain seeds must have 2 or 6 components")
    ta, tb = float(arr[0]), float(arr[1])
    pa, pb = gamma.point(ta), gamma.point(tb)
    if abs(pb[0] - pa[0]) < 1e-9:
        raise BeamError(f"seed endpoints share the abscissa {pa[0]:.3g}; "
                        "the beam graph needs distinct x values")
    c1 = (pb[1] - pa[1]) / (pb[0] - pa[0])
    c0 = pa[1] - c1 * pa[0] - u0.eval(pa[0], 0)
    return np.array([ta, tb, c0, c1, 0.0, 0.0])


def solve_free_sliding_beam(prob: BeamProblem, gamma: "BoundaryCurve | None",
                            seeds, *, tol: float = 1e-10,
                            chart_kind: str = "tubular",
                            max_iter: int = 60) -> SolveReport:
    """All Newton-converged sliding beams from the given seeds.

    Curve domains solve the 6-residual system [incidence, NBC pair] at
    both endpoints in the unknowns (t_a, t_b, c₀..c₃); interval domains
    take the exact flat path.  Solutions are deduplicated, endpoint
    labels ordered by abscissa, separated anchors enforced, and each
    result is admissibility-checked and annotated with the local
    nullity of the residual Jacobian."""
    if prob.interval is not None:
        return _flat_strip_solve(prob, seeds, tol)
    if gamma is None:
        gamma = prob.curve
    if gamma is None:
        raise BeamError("curve-domain solve needs a BoundaryCurve")
    u0 = prob.particular(0.0)
    cr = _chart_residual(prob, gamma, chart_kind)
    period = gamma.period
    min_sep = _MIN_SEPARATION * period

    def sep(ta: float, tb: float) -> float:
        d = abs(ta - tb) % period if gamma.closed else abs(ta - tb)
        return min(d, period - d) if gamma.closed else d

    def res(y: np.ndarray) -> np.ndarray:
        ta, tb = y[0], y[1]
        cf = BeamCoefficients(*y[2:])
        out = np.empty(6)
        for i, t in enumerate((ta, tb)):
            px, pu = gamma.point(t)
            jet = _beam_jet(cf, u0, float(px))
            out[3 * i] = jet.u - float(pu)
            r1, r2 = cr.eval(gamma._wrap(t), jet, prob.kappa,
                             prob.rho_function)
            out[3 * i + 1] = r1
            out[3 * i + 2] = r2
        return out

    system = ResidualSystem(res, n=6, m=6)
    report = SolveReport(solutions=[])
    found_params: list = []
    for k, seed in enumerate(seeds):
        try:
            y0 = _curve_seed_vector(gamma, u0, seed)
        except BeamError as exc:
            report.messages.append(f"seed {k}: rejected ({exc})")
            continue
        if sep(y0[0], y0[1]) < min_sep:
            report.messages.append(
                f"seed {k}: endpoints closer than {min_sep:.3g} in parameter")
            continue
        try:
            result = newton_solve(system, y0, tol=tol, max_iter=max_iter)
        except (SolverError, ChartUnsuitableError, BeamError) as exc:
            report.messages.append(f"seed {k}: failed ({exc})")
            continue
        if not result.converged:
            report.messages.append(f"seed {k}: no convergence "
                                   f"({result.message})")
            continue
        y = result.x
        if sep(y[0], y[1]) < min_sep:
            report.messages.append(
                f"seed {k}: converged to coincident endpoints, discarded")
            continue
        ta, tb = gamma._wrap(y[0]), gamma._wrap(y[1])
        if gamma.point(ta)[0] > gamma.point(tb)[0]:
            ta, tb = tb, ta
        params = np.array([ta, tb, *y[2:]])
        if any(_param_distance(params, q, period, gamma.closed) <= 1e-6
               for q in found_params):
            report.messages.append(f"seed {k}: duplicate of an earlier "
                                   "solution")
            continue
        cf = BeamCoefficients(*y[2:])
        xa, xb = float(gamma.point(ta)[0]), float(gamma.point(tb)[0])
        curve = SampledCurve.from_function(
            lambda xx: beam_value(cf, u0, xx, 0), xa, xb, 160)
        if not is_admissible(curve, gamma, tol=1e-6):
            report.messages.append(f"seed {k}: converged curve is not "
                                   "admissible, discarded")
            continue
        rvec = res(np.array([ta, tb, *y[2:]]))
        nullity = _newton_nullity(system, np.array([ta, tb, *y[2:]]))
        found_params.append(params)
        report.solutions.append(SlidingSolution(
            t_a=float(ta), t_b=float(tb), coeffs=cf,
            residual_norms=tuple(float(r) for r in rvec),
            nullity=nullity))
    if not report.solutions:
        report.messages.append("no solutions found from the given seeds")
    return report


def _param_distance(p: np.ndarray, q: np.ndarray, period: float,
                    closed: bool) -> float:
    dt = np.abs(p[:2] - q[:2])
    if closed:
        dt = np.minimum(dt % period, period - dt % period)
    return float(max(np.max(dt), np.max(np.abs(p[2:] - q[2:]))))


def _nullity(J: np.ndarray) -> int:
    """n - rank, with rank read off the singular values."""
    sv = np.linalg.svd(J, compute_uv=False)
    rank = int(np.sum(sv >= 1e-6 * max(sv[0], 1.0)))
    return J.shape[1] - rank


def _newton_nullity(system: ResidualSystem, y: np.ndarray) -> int:
    return _nullity(system.jac(y))


# ---------------------------------------------------------------------------
# closed-form reference for linear charts


def linear_chart_nbc_closed_form() -> tuple:
    """Hand-derived NBC pair of the beam density in a general linear
    chart x_amb = e + a x + b u, u_amb = f + c x + d u (chart
    coordinates on the right), as expressions with parameters
    a, b, c, d, e, f, kappa and the load rho.

    With W = a + b p and J = ad − bc:
        first  = κ q J² / W⁵
        second = κ J² (5 b q²/2 − r W) / W⁶ − ρ(x_amb) · u_amb · b.

    Used as an independent cross-check of the pullback pipeline.
    """
    params = ("a", "b", "c", "d", "e", "f", "kappa")
    pe = lambda s: parse_expression(s, parameters=params, functions=("rho",))
    first = pe("kappa*q*(a*d - b*c)^2 / (a + b*p)^5")
    second = pe("kappa*(a*d - b*c)^2 * (5/2*b*q^2 - r*(a + b*p)) / (a + b*p)^6"
                " - rho(e + a*x + b*u) * (f + c*x + d*u) * b")
    return first, second
