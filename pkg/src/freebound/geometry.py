"""Planar boundary curves, boundary-adapted charts and admissibility.

The boundary Γ of the domain is a parametrized curve γ(t) = (X(t), U(t))
with the interior on its left (for ``orientation=+1``).  Two kinds of
boundary-adapted chart are provided, both mapping chart coordinates
(x, u) — the "barred" ones, with Γ at {x = 0} and the interior at
x > 0 — to the ambient plane:

* the affine chart  Φ(x, u) = γ(t₀) + x·N(t₀) + u·T(t₀), exactly
  linear plus a translation (orthonormal frame, Jacobian ±1);
* the tubular chart Φ(x, u) = γ(τ) + x·N(τ) with τ = t₀ + u/‖γ′(t₀)‖,
  which flattens Γ exactly onto the u-axis at the cost of being valid
  only for x below the local reach of the curve.

Both kinds agree to first order at the anchor.  Charts can be built at
a numeric anchor, or as one-parameter families with the anchor left as
a symbolic parameter ``t0`` so that endpoint residuals compile to a
single tape reused across Newton iterations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._tape import compile_tape
from .exprs import (
    Expr,
    ExpressionError,
    add,
    const,
    div,
    function_names,
    free_symbols,
    mul,
    neg,
    partial_derivative,
    sqrt_,
    sub,
    substitute,
    var,
)
from .prolongation import PointTransformation, ProlongedTransformation, prolong

__all__ = [
    "GeometryError",
    "ReachError",
    "BoundaryCurve",
    "BoundaryChart",
    "SampledCurve",
    "curve_frame",
    "affine_chart",
    "tubular_chart",
    "chart_transformation",
    "is_admissible",
    "TANGENCY_FLOOR",
]


class GeometryError(ExpressionError):
    """Invalid curve or chart construction."""


class ReachError(GeometryError):
    """A tubular chart's offset radius exceeds the local reach of the
    curve (degenerate Jacobian detected on the sampling grid)."""


# Minimum |sin(angle)| between an admissible curve and the boundary at
# an endpoint; below this the curve counts as tangent to Γ.
TANGENCY_FLOOR = 1e-4


class BoundaryCurve:
    """A regular simple parametrized curve γ(t) = (X(t), U(t)).

    ``period`` is the parameter length: for a closed curve γ(0) = γ(T)
    and parameters are understood mod T; an open piece (``closed=False``,
    e.g. one straight wall of a strip) uses the plain range [0, T].
    ``orientation=+1`` means the domain interior lies on the left of the
    direction of travel, so the inward normal is the left normal.
    """

    def __init__(self, X: Expr, U: Expr, period: float, *,
                 orientation: int = 1, closed: bool = True, name: str = ""):
        if orientation not in (1, -1):
            raise GeometryError("orientation must be +1 or -1")
        if not (period > 0.0 and math.isfinite(period)):
            raise GeometryError("period must be a positive finite number")
        for label, e in (("X", X), ("U", U)):
            extra = free_symbols(e) - {"t"}
            if extra:
                raise GeometryError(
                    f"curve component {label} must be an expression in t "
                    f"only; found {sorted(extra)}")
            if function_names(e):
                raise GeometryError(
                    "named functions are not allowed in curve components")
        self.X = X
        self.U = U
        self.period = float(period)
        self.orientation = orientation
        self.closed = bool(closed)
        self.name = name

        dX, dU = partial_derivative(X, "t"), partial_derivative(U, "t")
        ddX, ddU = partial_derivative(dX, "t"), partial_derivative(dU, "t")
        self._t = {
            "X": compile_tape(X, ("t",)), "U": compile_tape(U, ("t",)),
            "dX": compile_tape(dX, ("t",)), "dU": compile_tape(dU, ("t",)),
            "ddX": compile_tape(ddX, ("t",)), "ddU": compile_tape(ddU, ("t",)),
        }
        self._validate()

    # -- sampling helpers -------------------------------------------------
    def _eval_grid(self, key: str, ts: np.ndarray) -> np.ndarray:
        return self._t[key].eval_many(ts.reshape(-1, 1))

    def _validate(self) -> None:
        n = 400
        ts = np.linspace(0.0, self.period, n, endpoint=not self.closed)
        vx, vu = self._eval_grid("dX", ts), self._eval_grid("dU", ts)
        speed2 = vx * vx + vu * vu
        if not np.all(speed2 > 1e-12):
            raise GeometryError("curve is not regular: γ′ vanishes (or "
                                "nearly) at a sampled parameter")
        if self.closed:
            gap = np.hypot(self.point(0.0)[0] - self.point(self.period)[0],
                           self.point(0.0)[1] - self.point(self.period)[1])
            if gap > 1e-12:
                raise GeometryError(
                    f"curve marked closed but γ(0) and γ(T) differ by {gap:.3e}")
        self._check_simple()

    def _check_simple(self, n: int = 256) -> None:
        ts = np.linspace(0.0, self.period, n + 1)
        px = self._eval_grid("X", ts)
        pu = self._eval_grid("U", ts)
        pts = np.column_stack([px, pu])
        if self.closed:
            a = pts[:n]
            b = np.roll(pts[:n], -1, axis=0)
            m = n
        else:
            a, b = pts[:-1], pts[1:]
            m = n
        scale = max(np.ptp(px), np.ptp(pu), 1e-30)
        tol = 1e-12 * scale * scale

        d1 = ((b[:, None, 0] - a[:, None, 0]) * (a[None, :, 1] - a[:, None, 1])
              - (b[:, None, 1] - a[:, None, 1]) * (a[None, :, 0] - a[:, None, 0]))
        d2 = ((b[:, None, 0] - a[:, None, 0]) * (b[None, :, 1] - a[:, None, 1])
              - (b[:, None, 1] - a[:, None, 1]) * (b[None, :, 0] - a[:, None, 0]))
        d3 = ((b[None, :, 0] - a[None, :, 0]) * (a[:, None, 1] - a[None, :, 1])
              - (b[None, :, 1] - a[None, :, 1]) * (a[:, None, 0] - a[None, :, 0]))
        d4 = ((b[None, :, 0] - a[None, :, 0]) * (b[:, None, 1] - a[None, :, 1])
              - (b[None, :, 1] - a[None, :, 1]) * (b[:, None, 0] - a[None, :, 0]))
        crossing = (d1 * d2 < -tol) & (d3 * d4 < -tol)
        idx = np.arange(m)
        diff = np.abs(idx[:, None] - idx[None, :])
        adjacent = diff <= 1
        if self.closed:
            adjacent |= diff >= m - 1
        if np.any(crossing & ~adjacent & (idx[:, None] < idx[None, :])):
            raise GeometryError("curve self-intersects (sampled polyline test)")

    # -- pointwise queries -------------------------------------------------
    def _wrap(self, t: float) -> float:
        if self.closed:
            return float(t) % self.period
        return float(t)

    def point(self, t: float) -> np.ndarray:
        t = self._wrap(t)
        v = np.array([t])
        return np.array([self._t["X"].eval_vector(v), self._t["U"].eval_vector(v)])

    def velocity(self, t: float) -> np.ndarray:
        t = self._wrap(t)
        v = np.array([t])
        return np.array([self._t["dX"].eval_vector(v), self._t["dU"].eval_vector(v)])

    def frame(self, t: float) -> tuple:
        """(point, unit tangent, inward unit normal) at parameter t."""
        p = self.point(t)
        vel = self.velocity(t)
        speed = math.hypot(vel[0], vel[1])
        tang = vel / speed
        normal = self.orientation * np.array([-tang[1], tang[0]])
        return p, tang, normal

    def curvature(self, t: float) -> float:
        """Signed curvature w.r.t. the inward normal (κ > 0 bends inward)."""
        t = self._wrap(t)
        v = np.array([t])
        vx = self._t["dX"].eval_vector(v)
        vu = self._t["dU"].eval_vector(v)
        ax = self._t["ddX"].eval_vector(v)
        au = self._t["ddU"].eval_vector(v)
        speed = math.hypot(vx, vu)
        return self.orientation * (vx * au - vu * ax) / speed ** 3

    def reach_estimate(self, samples: int = 512) -> float:
        """Half the curvature radius at the most-curved sampled point
        (a conservative offset radius; infinite for straight pieces)."""
        ts = np.linspace(0.0, self.period, samples, endpoint=not self.closed)
        vx, vu = self._eval_grid("dX", ts), self._eval_grid("dU", ts)
        ax, au = self._eval_grid("ddX", ts), self._eval_grid("ddU", ts)
        speed = np.hypot(vx, vu)
        kappa = np.abs(vx * au - vu * ax) / speed ** 3
        kmax = float(np.max(kappa))
        if kmax < 1e-9:
            return math.inf
        return 0.5 / kmax

    def nearest_parameter(self, point, samples: int = 1024) -> float:
        """Parameter of the curve point nearest to ``point`` (grid scan
        plus Newton refinement on (γ(t) − P)·γ′(t) = 0)."""
        px, pu = float(point[0]), float(point[1])
        ts = np.linspace(0.0, self.period, samples, endpoint=not self.closed)
        gx, gu = self._eval_grid("X", ts), self._eval_grid("U", ts)
        d2 = (gx - px) ** 2 + (gu - pu) ** 2
        t = float(ts[int(np.argmin(d2))])
        for _ in range(40):
            v = np.array([self._wrap(t)])
            rx = self._t["X"].eval_vector(v) - px
            ru = self._t["U"].eval_vector(v) - pu
            vx = self._t["dX"].eval_vector(v)
            vu = self._t["dU"].eval_vector(v)
            ax = self._t["ddX"].eval_vector(v)
            au = self._t["ddU"].eval_vector(v)
            g = rx * vx + ru * vu
            dg = vx * vx + vu * vu + rx * ax + ru * au
            if abs(dg) < 1e-300:
                break
            step = g / dg
            t -= step
            if not self.closed:
                t = min(max(t, 0.0), self.period)
            if abs(step) < 1e-14 * (1.0 + abs(t)):
                break
        return self._wrap(t)

    def distance(self, point) -> float:
        t = self.nearest_parameter(point)
        p = self.point(t)
        return math.hypot(p[0] - float(point[0]), p[1] - float(point[1]))


def curve_frame(gamma: BoundaryCurve, t: float) -> tuple:
    """(point, unit tangent, inward unit normal) of Γ at parameter t."""
    return gamma.frame(t)


# ---------------------------------------------------------------------------
# boundary charts


@dataclass(frozen=True)
class BoundaryChart:
    """A boundary-adapted coordinate patch around γ(anchor).

    ``transformation`` maps chart coordinates (x, u) — boundary at
    {x = 0}, interior at x > 0 — to the ambient plane.  ``delta`` is the
    validity radius (infinite for affine charts)."""

    transformation: PointTransformation
    anchor: float
    kind: str
    delta: float
    curve: BoundaryCurve

    @cached_property
    def prolonged(self) -> ProlongedTransformation:
        return prolong(self.transformation)


def _component_exprs(gamma: BoundaryCurve, anchor_expr: Expr) -> dict:
    """Curve point / unit frame components as Exprs of the anchor."""
    X, U = gamma.X, gamma.U
    dX = partial_derivative(X, "t")
    dU = partial_derivative(U, "t")
    speed = sqrt_(add(mul(dX, dX), mul(dU, dU)))
    tx, tu = div(dX, speed), div(dU, speed)
    if gamma.orientation == 1:
        nx, nu = neg(tu), tx
    else:
        nx, nu = tu, neg(tx)
    at = {"t": anchor_expr}
    return {k: substitute(e, at) for k, e in
            (("Px", X), ("Pu", U), ("Tx", tx), ("Tu", tu),
             ("Nx", nx), ("Nu", nu), ("speed", speed))}


def chart_transformation(gamma: BoundaryCurve, kind: str,
                         t0: "float | None" = None,
                         delta: float = 1.0) -> PointTransformation:
    """Chart-to-ambient transformation, optionally as a one-parameter
    family with the anchor left symbolic as parameter ``t0``.

    ``kind="affine"``:  Φ(x,u) = γ(t₀) + x N(t₀) + u T(t₀);
    ``kind="tubular"``: Φ(x,u) = γ(τ) + x N(τ), τ = t₀ + u/‖γ′(t₀)‖.
    """
    symbolic = t0 is None
    anchor = var("t0") if symbolic else const(float(t0))
    params = ("t0",) if symbolic else ()
    x, u = var("x"), var("u")

    if kind == "affine":
        c = _component_exprs(gamma, anchor)
        Xc = add(c["Px"], add(mul(x, c["Nx"]), mul(u, c["Tx"])))
        Uc = add(c["Pu"], add(mul(x, c["Nu"]), mul(u, c["Tu"])))
        # exact inverse: project onto the orthonormal frame
        ix = add(mul(c["Nx"], sub(x, c["Px"])), mul(c["Nu"], sub(u, c["Pu"])))
        iu = add(mul(c["Tx"], sub(x, c["Px"])), mul(c["Tu"], sub(u, c["Pu"])))
        inverse = PointTransformation(ix, iu, parameters=params)
        box = ((-1.0, 1.0), (-1.0, 1.0))
        return PointTransformation(Xc, Uc, parameters=params, inverse=inverse,
                                   domain_box=box, name=f"affine@{t0}")
    if kind == "tubular":
        c0 = _component_exprs(gamma, anchor)
        tau = add(anchor, div(u, c0["speed"]))
        c = _component_exprs(gamma, tau)
        Xc = add(c["Px"], mul(x, c["Nx"]))
        Uc = add(c["Pu"], mul(x, c["Nu"]))
        box = ((0.0, float(delta)), (-float(delta), float(delta)))
        return PointTransformation(Xc, Uc, parameters=params,
                                   domain_box=box, name=f"tubular@{t0}")
    raise GeometryError(f"unknown chart kind {kind!r}")


def affine_chart(gamma: BoundaryCurve, t0: float) -> BoundaryChart:
    """Linear-plus-translation chart whose u-axis is the tangent line of
    Γ at γ(t₀) and whose x-axis points along the inward normal."""
    phi = chart_transformation(gamma, "affine", gamma._wrap(t0))
    return BoundaryChart(phi, float(t0), "affine", math.inf, gamma)


def tubular_chart(gamma: BoundaryCurve, t0: float,
                  delta: "float | None" = None) -> BoundaryChart:
    """Normal-offset chart flattening Γ exactly onto {x = 0}.

    ``delta`` must stay below the local reach of the curve; when omitted,
    half the estimated curvature radius is used.  The Jacobian is sampled
    on a (δ/50)-grid over the patch and any degeneracy or sign change
    raises :class:`ReachError`.
    """
    if delta is None:
        delta = gamma.reach_estimate()
        if not math.isfinite(delta):
            delta = min(1.0, gamma.period / 4.0)
    if delta <= 0.0:
        raise GeometryError("chart radius delta must be positive")
    t0w = gamma._wrap(t0)
    phi = chart_transformation(gamma, "tubular", t0w, delta=delta)
    det_tape = compile_tape(phi.jacobian_det(), ("x", "u"))
    g = np.linspace(0.0, float(delta), 51)
    gu = np.linspace(-float(delta), float(delta), 51)
    xx, uu = np.meshgrid(g, gu)
    table = np.column_stack([xx.ravel(), uu.ravel()])
    dets = det_tape.eval_many(table)
    d0 = det_tape.eval_vector(np.array([0.0, 0.0]))
    if not np.all(dets * math.copysign(1.0, d0) > 1e-9 * abs(d0)):
        raise ReachError(
            f"tubular chart radius {delta:g} exceeds the reach of the curve "
            f"near t0={t0w:g} (Jacobian degenerates on the patch)")
    return BoundaryChart(phi, float(t0), "tubular", float(delta), gamma)


# ---------------------------------------------------------------------------
# sampled curves


_PINV_CACHE: dict = {}


def _window_pinv(offsets: tuple, degree: int) -> tuple:
    """Pseudo-inverse of the window Vandermonde in the scaled coordinate
    offset/max|offset| (scaling keeps the fit well conditioned)."""
    key = (offsets, degree)
    got = _PINV_CACHE.get(key)
    if got is None:
        scale = float(max(abs(o) for o in offsets))
        xi = np.asarray(offsets, dtype=float) / scale
        V = np.vander(xi, degree + 1, increasing=True)
        got = _PINV_CACHE[key] = (np.linalg.pinv(V), scale)
    return got


class SampledCurve:
    """A graph-mode curve: ordinates sampled on a uniform abscissa grid.

    Derivatives of any order up to 4 are recovered by local polynomial
    least-squares fits (degree 7 over a sliding 13-point window, clipped
    at the ends), accurate enough to feed fourth-derivative residuals.
    """

    __slots__ = ("x", "u", "h")

    def __init__(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        if x.ndim != 1 or x.shape != u.shape or x.size < 2:
            raise GeometryError("need matching 1-D arrays with >= 2 samples")
        dx = np.diff(x)
        if not np.all(dx > 0.0):
            raise GeometryError("abscissae must be strictly increasing")
        h = float(dx[0])
        if np.max(np.abs(dx - h)) > 1e-9 * h:
            raise GeometryError("abscissa grid must be uniform")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
            raise GeometryError("samples must be finite")
        self.x = x
        self.u = u
        self.h = h

    @classmethod
    def from_function(cls, f, a: float, b: float, n: int) -> "SampledCurve":
        x = np.linspace(float(a), float(b), int(n) + 1)
        u = np.asarray([float(f(xi)) for xi in x])
        return cls(x, u)

    @property
    def a(self) -> float:
        return float(self.x[0])

    @property
    def b(self) -> float:
        return float(self.x[-1])

    def derivative(self, k: int) -> np.ndarray:
        """k-th derivative at every grid node (k = 0 returns the values)."""
        if k == 0:
            return self.u.copy()
        if not 1 <= k <= 6:
            raise GeometryError("derivative order must be in 0..6")
        n = self.x.size
        # wider windows for higher orders: the coefficient-to-derivative
        # factor k!/(h*w)**k makes roundoff shrink like w**-k
        w = max(6, 4 * k)
        if n < 2 * w + 1:
            w = (n - 1) // 2
        degree = min(7, 2 * w)
        if degree < k:
            raise GeometryError(
                f"too few samples ({n}) for derivative order {k}")
        out = np.empty(n)
        fact = math.factorial(k)
        for i in range(n):
            start = min(max(i - w, 0), n - (2 * w + 1))
            offsets = tuple(range(start - i, start - i + 2 * w + 1))
            pinv, scale = _window_pinv(offsets, degree)
            # fitting u - u_i shifts only the constant coefficient but
            # keeps the window values small, which tames roundoff in the
            # high-order coefficients
            window = self.u[start:start + 2 * w + 1] - self.u[i]
            coeffs = pinv @ window
            out[i] = coeffs[k] * fact / (self.h * scale) ** k
        return out

    def endpoint_slope(self, side: str) -> float:
        n = self.x.size
        m = min(8, n)
        if side == "a":
            xs, us = self.x[:m], self.u[:m]
            x0 = self.x[0]
        else:
            xs, us = self.x[-m:], self.u[-m:]
            x0 = self.x[-1]
        deg = min(3, m - 1)
        coeffs = np.polyfit(xs - x0, us, deg)
        return float(coeffs[-2]) if deg >= 1 else 0.0

    # small arithmetic so variations u ± ε·v stay curves
    def _binary(self, other, op):
        if isinstance(other, SampledCurve):
            if other.x.shape != self.x.shape or \
                    np.max(np.abs(other.x - self.x)) > 1e-12 * (1 + abs(self.b)):
                raise GeometryError("sampled curves live on different grids")
            return SampledCurve(self.x, op(self.u, other.u))
        return SampledCurve(self.x, op(self.u, float(other)))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        return SampledCurve(self.x, self.u * float(scalar))

    __rmul__ = __mul__


def is_admissible(L: SampledCurve, gamma: BoundaryCurve,
                  tol: float = 1e-8) -> bool:
    """Whether L is an admissible curve for the domain bounded by Γ:
    endpoints on Γ (within tol), every interior sample strictly off Γ,
    and no tangency between L and Γ at either endpoint."""
    pa = (L.x[0], L.u[0])
    pb = (L.x[-1], L.u[-1])
    if gamma.distance(pa) > tol or gamma.distance(pb) > tol:
        return False
    # cheap polyline pre-filter; exact distance only for nearby samples
    ts = np.linspace(0.0, gamma.period, 512, endpoint=not gamma.closed)
    gx = gamma._eval_grid("X", ts)
    gu = gamma._eval_grid("U", ts)
    seg = float(np.max(np.hypot(np.diff(gx), np.diff(gu)))) if ts.size > 1 else 0.0
    node_d = np.sqrt((L.x[1:-1, None] - gx[None, :]) ** 2
                     + (L.u[1:-1, None] - gu[None, :]) ** 2).min(axis=1)
    for i in np.nonzero(node_d <= tol + seg)[0]:
        if gamma.distance((L.x[i + 1], L.u[i + 1])) <= tol:
            return False
    for point, side in ((pa, "a"), (pb, "b")):
        t = gamma.nearest_parameter(point)
        _, tang, _ = gamma.frame(t)
        slope = L.endpoint_slope(side)
        cl = np.array([1.0, slope]) / math.hypot(1.0, slope)
        if abs(cl[0] * tang[1] - cl[1] * tang[0]) <= TANGENCY_FLOOR:
            return False
    return True
