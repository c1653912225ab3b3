"""Prolongation of planar coordinate changes to third-order jet space.

A :class:`PointTransformation` maps a source plane to a target plane;
its components are expressions named in the *source* variables ``x, u``
(plus declared parameters).  :func:`prolong` lifts the map to jets via
the recursion

    F = D(ubar) / D(xbar),
    G = D(F) / D(xbar),
    H = D(G) / D(xbar),

where D is the truncated total derivative, so that F, G, H transform
the first, second and third derivative of a graph.  The lift is the
unique one preserving the contact structure (checked numerically by
:func:`contact_residual`).

Prolonged maps also act pointwise on numeric jets (:meth:`map_jet`) and
invert numerically (:meth:`invert_jet`): the base point by a 2-D Newton
iteration, the slope by the Moebius relation between source and target
slopes, and the higher derivatives through the affine dependence of G
on q and of H on r.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ._tape import Tape, compile_tape
from .exprs import (
    DomainError,
    EvaluationError,
    Expr,
    ExpressionError,
    JetPoint,
    free_symbols,
    function_names,
    mul,
    partial_derivative,
    sub,
    total_derivative,
    var,
)

__all__ = [
    "PointTransformation",
    "ProlongedTransformation",
    "ProlongationError",
    "ChartUnsuitableError",
    "prolong",
    "compose",
    "contact_residual",
]


class ProlongationError(ExpressionError):
    """A transformation fails the validity checks (degenerate Jacobian,
    vanishing total derivative of the base component)."""


class ChartUnsuitableError(EvaluationError):
    """A pointwise jet operation hit a direction the chart cannot
    represent (vertical tangent, vanishing Jacobian) or its numeric
    inversion failed."""


_JET_NAMES = ("x", "u", "p", "q", "r")


@dataclass(frozen=True)
class PointTransformation:
    """A planar map written in source coordinates named ``x, u``.

    ``xbar`` and ``ubar`` are the components of the image point.  Extra
    symbols must be declared in ``parameters``.  ``domain_box`` declares
    the (x, u) region on which the map is claimed to be a
    diffeomorphism; validity is sampled there.  ``inverse``, when given,
    is the symbolic inverse map (components again named in *its* source
    variables, i.e. the barred ones).
    """

    xbar: Expr
    ubar: Expr
    parameters: tuple = ()
    inverse: "PointTransformation | None" = None
    domain_box: tuple = ((-1.0, 1.0), (-1.0, 1.0))
    name: str = ""

    def __post_init__(self):
        allowed = {"x", "u"} | set(self.parameters)
        for label, component in (("xbar", self.xbar), ("ubar", self.ubar)):
            extra = free_symbols(component) - allowed
            if extra:
                raise ProlongationError(
                    f"{label} component uses undeclared symbols "
                    f"{sorted(extra)} (jet variables beyond x, u are not "
                    f"allowed in point transformations)")

    def jacobian_entries(self) -> tuple:
        """Partial derivatives (xbar_x, xbar_u, ubar_x, ubar_u)."""
        return (partial_derivative(self.xbar, "x"),
                partial_derivative(self.xbar, "u"),
                partial_derivative(self.ubar, "x"),
                partial_derivative(self.ubar, "u"))

    def jacobian_det(self) -> Expr:
        xx, xu, ux, uu = self.jacobian_entries()
        return sub(mul(xx, uu), mul(xu, ux))


def compose(outer: PointTransformation,
            inner: PointTransformation) -> PointTransformation:
    """The composition ``outer after inner`` as a point transformation."""
    from .exprs import substitute

    mapping = {"x": inner.xbar, "u": inner.ubar}
    inverse = None
    if outer.inverse is not None and inner.inverse is not None:
        inverse = compose(inner.inverse, outer.inverse)
    return PointTransformation(
        xbar=substitute(outer.xbar, mapping),
        ubar=substitute(outer.ubar, mapping),
        parameters=tuple(sorted(set(outer.parameters) | set(inner.parameters))),
        inverse=inverse,
        domain_box=inner.domain_box,
        name=f"{outer.name or 'outer'}∘{inner.name or 'inner'}")


class ProlongedTransformation:
    """A point transformation together with its jet lifts F, G, H."""

    def __init__(self, base: PointTransformation, F: Expr, G: Expr, H: Expr):
        self.base = base
        self.F = F
        self.G = G
        self.H = H
        self._tapes: dict = {}
        self._inverse_pro: "ProlongedTransformation | None" = None

    # -- tape plumbing --------------------------------------------------
    def _signature(self) -> tuple:
        return _JET_NAMES + tuple(self.base.parameters)

    def _tape(self, key: str, expr: Expr) -> Tape:
        tape = self._tapes.get(key)
        if tape is None:
            tape = self._tapes[key] = compile_tape(expr, self._signature())
        return tape

    def _vector(self, jet: JetPoint, params) -> np.ndarray:
        sig = self._signature()
        vec = np.zeros(len(sig))
        vals = jet.values()
        for i, name in enumerate(sig):
            if name in vals:
                vec[i] = vals[name]
            elif params and name in params:
                vec[i] = params[name]
            elif name not in _JET_NAMES:
                raise EvaluationError(f"missing parameter {name!r}")
        return vec

    def _funcs(self, functions) -> list:
        names = sorted(set().union(
            *(function_names(e) for e in
              (self.base.xbar, self.base.ubar, self.F, self.G, self.H))))
        functions = functions or {}
        missing = [n for n in names if n not in functions]
        if missing:
            raise EvaluationError(f"unbound functions: {missing}")
        self._fnames = names
        return [functions[n] for n in names]

    # -- pointwise action ------------------------------------------------
    def map_jet(self, jet: JetPoint, params: "Mapping | None" = None,
                functions: "Mapping | None" = None) -> JetPoint:
        """Image of a numeric jet (to the order the jet carries, <= 3)."""
        funcs = self._funcs(functions)
        vec = self._vector(jet, params)
        order = min(jet.order, 3)
        lifts = (("x", self.base.xbar, 0), ("u", self.base.ubar, 0),
                 ("p", self.F, 1), ("q", self.G, 2), ("r", self.H, 3))
        out = {}
        for name, expr, needed in lifts:
            if needed > order:
                break
            try:
                out[name] = self._tape(name, expr).eval_vector(vec, funcs)
            except DomainError as exc:
                raise ChartUnsuitableError(
                    f"jet cannot be mapped ({exc})") from exc
        return JetPoint(out["x"], out["u"], out.get("p"), out.get("q"),
                        out.get("r"))

    def invert_jet(self, jet: JetPoint, params: "Mapping | None" = None,
                   functions: "Mapping | None" = None,
                   seed: tuple = (0.0, 0.0), tol: float = 1e-12,
                   max_iter: int = 60) -> JetPoint:
        """Preimage of a numeric jet under the prolonged map.

        Uses the symbolic inverse when the base transformation carries
        one; otherwise Newton iteration on the base components from
        ``seed``, followed by closed-form recovery of the derivative
        slots (the slope by the Moebius relation, q and r through the
        affine dependence of G on q and H on r).
        """
        if self.base.inverse is not None:
            if self._inverse_pro is None:
                self._inverse_pro = prolong(self.base.inverse)
            return self._inverse_pro.map_jet(jet, params, functions)

        funcs = self._funcs(functions)
        params = params or {}
        sig = self._signature()
        vec = np.zeros(len(sig))
        for i, name in enumerate(sig):
            if name not in _JET_NAMES:
                if name not in params:
                    raise EvaluationError(f"missing parameter {name!r}")
                vec[i] = params[name]

        xx, xu, ux, uu = self.base.jacobian_entries()
        t_x = self._tape("x", self.base.xbar)
        t_u = self._tape("u", self.base.ubar)
        t_xx = self._tape("jac_xx", xx)
        t_xu = self._tape("jac_xu", xu)
        t_ux = self._tape("jac_ux", ux)
        t_uu = self._tape("jac_uu", uu)

        # Newton on the base point
        bx, bu = float(seed[0]), float(seed[1])
        target_scale = 1.0 + abs(jet.x) + abs(jet.u)
        converged = False
        for _ in range(max_iter):
            vec[0], vec[1] = bx, bu
            try:
                fx = t_x.eval_vector(vec, funcs) - jet.x
                fu = t_u.eval_vector(vec, funcs) - jet.u
                if max(abs(fx), abs(fu)) <= tol * target_scale:
                    converged = True
                    break
                a11 = t_xx.eval_vector(vec, funcs)
                a12 = t_xu.eval_vector(vec, funcs)
                a21 = t_ux.eval_vector(vec, funcs)
                a22 = t_uu.eval_vector(vec, funcs)
            except DomainError as exc:
                raise ChartUnsuitableError(
                    f"inversion left the chart domain ({exc})") from exc
            det = a11 * a22 - a12 * a21
            if abs(det) < 1e-14:
                raise ChartUnsuitableError(
                    "Jacobian numerically singular during inversion")
            bx -= (a22 * fx - a12 * fu) / det
            bu -= (a11 * fu - a21 * fx) / det
        if not converged:
            raise ChartUnsuitableError(
                f"base-point inversion did not converge near seed {seed}")

        vec[0], vec[1] = bx, bu
        out = JetPoint(bx, bu)
        if jet.p is None:
            return out
        a11 = t_xx.eval_vector(vec, funcs)
        a12 = t_xu.eval_vector(vec, funcs)
        a21 = t_ux.eval_vector(vec, funcs)
        a22 = t_uu.eval_vector(vec, funcs)
        denom = a22 - jet.p * a12
        if abs(denom) < 1e-12 * (1.0 + abs(jet.p)):
            raise ChartUnsuitableError(
                "target slope is vertical in the source chart")
        bp = (jet.p * a11 - a21) / denom
        vec[2] = bp
        if jet.q is None:
            return JetPoint(bx, bu, bp)

        # G is affine in q: q_target = G0 + Gq * q_source
        t_g = self._tape("q", self.G)
        t_gq = self._tape("dGdq", partial_derivative(self.G, "q"))
        try:
            g0 = t_g.eval_vector(vec, funcs)           # vec has q slot = 0
            gq = t_gq.eval_vector(vec, funcs)
        except DomainError as exc:
            raise ChartUnsuitableError(f"second-order inversion failed "
                                       f"({exc})") from exc
        if abs(gq) < 1e-14:
            raise ChartUnsuitableError(
                "second-order lift is degenerate at this jet")
        bq = (jet.q - g0) / gq
        vec[3] = bq
        if jet.r is None:
            return JetPoint(bx, bu, bp, bq)

        t_h = self._tape("r", self.H)
        t_hr = self._tape("dHdr", partial_derivative(self.H, "r"))
        try:
            h0 = t_h.eval_vector(vec, funcs)           # vec has r slot = 0
            hr = t_hr.eval_vector(vec, funcs)
        except DomainError as exc:
            raise ChartUnsuitableError(f"third-order inversion failed "
                                       f"({exc})") from exc
        if abs(hr) < 1e-14:
            raise ChartUnsuitableError(
                "third-order lift is degenerate at this jet")
        br = (jet.r - h0) / hr
        return JetPoint(bx, bu, bp, bq, br)


def _sample_validity(phi: PointTransformation, rng: np.random.Generator,
                     samples: int = 64) -> None:
    """Sampled nondegeneracy checks used by :func:`prolong`."""
    det = phi.jacobian_det()
    dx_total = total_derivative(phi.xbar, 1)
    names = sorted(free_symbols(det) | free_symbols(dx_total) | {"x", "u", "p"})
    det_tape = compile_tape(det, names)
    dxt_tape = compile_tape(dx_total, names)

    fnames = sorted(function_names(det) | function_names(dx_total))
    if fnames:
        from .exprs import _random_function
        funcs = [_random_function(rng) for _ in fnames]
    else:
        funcs = []

    (xlo, xhi), (ulo, uhi) = phi.domain_box
    spans = {"x": (xlo, xhi), "u": (ulo, uhi)}
    valid = 0
    dx_seen_nonzero = False
    for _ in range(samples):
        vec = np.array([
            rng.uniform(*spans.get(name, (-2.0, 2.0))) for name in names])
        try:
            d = det_tape.eval_vector(vec, funcs)
        except DomainError:
            continue
        valid += 1
        if abs(d) < 1e-12:
            raise ProlongationError(
                "transformation has a numerically degenerate Jacobian "
                "on its declared domain")
        try:
            if abs(dxt_tape.eval_vector(vec, funcs)) > 1e-13:
                dx_seen_nonzero = True
        except DomainError:
            dx_seen_nonzero = True  # poles are certainly not identically zero
    if valid == 0:
        raise ProlongationError(
            "transformation components are not evaluable anywhere on the "
            "declared domain")
    if not dx_seen_nonzero:
        raise ProlongationError(
            "total derivative of the base x-component vanishes identically; "
            "the map sends graphs to vertical curves")


def prolong(phi: PointTransformation, *, seed: int = 0) -> ProlongedTransformation:
    """Lift a point transformation to third-order jets.

    Returns the transformation together with F (slope), G (second
    derivative) and H (third derivative) built by the total-derivative
    recursion.  Raises :class:`ProlongationError` when the sampled
    Jacobian is degenerate or D(xbar) vanishes identically.
    """
    rng = np.random.default_rng(seed)
    _sample_validity(phi, rng)
    dx = total_derivative(phi.xbar, 1)
    du = total_derivative(phi.ubar, 1)
    F = du / dx
    G = total_derivative(F, 2) / dx
    H = total_derivative(G, 3) / dx
    return ProlongedTransformation(phi, F, G, H)


def contact_residual(pt: ProlongedTransformation) -> tuple:
    """Residual coefficients of the contact-compatibility test.

    Expands d(ubar) - F d(xbar) in the basis {dx, du} and subtracts the
    multiple mu * (du - p dx) with mu = ubar_u - F * xbar_u.  Both
    returned coefficients must vanish numerically for a genuine lift
    (the du coefficient cancels structurally).
    """
    xx, xu, ux, uu = pt.base.jacobian_entries()
    mu = sub(uu, mul(pt.F, xu))
    coeff_dx = sub(ux, mul(pt.F, xx))
    res_dx = coeff_dx + mul(var("p"), mu)
    res_du = sub(mu, mu)
    return (res_dx, res_du)
