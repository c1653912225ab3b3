"""Sliding geodesics: critical curves of the length functional.

A straight segment between two boundary points γ(t_a), γ(t_b) is
critical for arclength with freely sliding endpoints exactly when it
meets the boundary orthogonally at both ends.  For the order-1 density
√(1+p²) the natural boundary condition in a boundary-adapted chart is
∂λ̄/∂p̄ = T·d/‖d‖ — the cosine of the angle between the boundary
tangent and the chord — so the solver works directly with the chord
endpoints (t_a, t_b) and needs no graph coefficients.  That keeps
vertical chords (which are not graphs over x) representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exprs import EvaluationError, parse_expression
from .geometry import BoundaryCurve
from .solve import ResidualSystem, SolverError, newton_solve, trace_family
from .variational import Lagrangian

__all__ = [
    "length_lagrangian",
    "transversality_residual",
    "ChordSolution",
    "GeodesicReport",
    "StripGeodesic",
    "solve_strip_geodesics",
    "solve_closed_geodesics",
    "trace_closed_geodesic_family",
]

_MIN_SEPARATION = 1e-3     # times the period


def length_lagrangian() -> Lagrangian:
    """The arclength density √(1+p²)."""
    return Lagrangian(order=1, density=parse_expression("sqrt(1 + p^2)"))


def transversality_residual(gamma: BoundaryCurve, ta: float,
                            tb: float) -> tuple:
    """(T(t_a)·d̂, T(t_b)·d̂) for the chord d = γ(t_b) − γ(t_a).

    Both components vanish exactly when the chord is orthogonal to the
    boundary at its endpoints, which for the length functional is the
    natural boundary condition at a freely sliding endpoint."""
    pa = np.asarray(gamma.point(ta), dtype=float)
    pb = np.asarray(gamma.point(tb), dtype=float)
    d = pb - pa
    norm = float(np.hypot(d[0], d[1]))
    if norm < 1e-12:
        raise EvaluationError(
            f"chord endpoints coincide (t_a={ta:g}, t_b={tb:g})")
    d = d / norm
    _, Ta, _ = gamma.frame(ta)
    _, Tb, _ = gamma.frame(tb)
    return float(Ta @ d), float(Tb @ d)


@dataclass(frozen=True)
class ChordSolution:
    t_a: float
    t_b: float
    endpoint_a: tuple
    endpoint_b: tuple
    length: float
    residuals: tuple
    nullity: int

    def midpoint(self) -> tuple:
        return (0.5 * (self.endpoint_a[0] + self.endpoint_b[0]),
                0.5 * (self.endpoint_a[1] + self.endpoint_b[1]))

    def line_distance(self, point) -> float:
        """Distance from ``point`` to the chord's supporting line."""
        ax, au = self.endpoint_a
        bx, bu = self.endpoint_b
        dx, du = bx - ax, bu - au
        nrm = math.hypot(dx, du)
        return abs(dx * (point[1] - au) - du * (point[0] - ax)) / nrm


@dataclass
class GeodesicReport:
    solutions: list
    messages: list = field(default_factory=list)
    family: "object | None" = None      # ContinuationPath when traced


@dataclass(frozen=True)
class StripGeodesic:
    """A critical line u = c₁x + c₀ on the strip [a,b]×R."""
    c0: float
    c1: float
    residuals: tuple
    nullity: int


def solve_strip_geodesics(a: float, b: float, seeds, *,
                          tol: float = 1e-10) -> GeodesicReport:
    """Length-critical lines on the strip with walls at x=a and x=b.

    The walls are vertical, so the transversality condition at each
    endpoint reads p/√(1+p²) = 0 — the line must be horizontal.  The
    intercept stays free (nullity 1)."""
    if not a < b:
        raise SolverError("strip needs a < b")

    def res(y: np.ndarray) -> np.ndarray:
        c1 = y[1]
        t = c1 / math.sqrt(1.0 + c1 * c1)
        return np.array([t, t])

    system = ResidualSystem(res, n=2, m=2)
    report = GeodesicReport(solutions=[])
    seen: list = []
    for k, seed in enumerate(seeds):
        y0 = np.asarray(seed, dtype=float)
        result = newton_solve(system, y0, tol=tol)
        if not result.converged:
            report.messages.append(f"seed {k}: no convergence")
            continue
        c0, c1 = float(result.x[0]), float(result.x[1])
        if any(abs(c0 - s) <= 1e-6 for s in seen):
            report.messages.append(f"seed {k}: duplicate")
            continue
        seen.append(c0)
        rv = res(result.x)
        J = system.jac(result.x)
        sv = np.linalg.svd(J, compute_uv=False)
        nullity = 2 - int(np.sum(sv >= 1e-6 * max(sv[0], 1.0)))
        report.solutions.append(StripGeodesic(
            c0=c0, c1=c1, residuals=tuple(float(r) for r in rv),
            nullity=nullity))
    if not report.solutions:
        report.messages.append("no solutions found from the given seeds")
    return report


def _chord_system(gamma: BoundaryCurve) -> ResidualSystem:
    def res(y: np.ndarray) -> np.ndarray:
        return np.array(transversality_residual(gamma, y[0], y[1]))

    return ResidualSystem(res, n=2, m=2)


def _mod_dist(x: float, period: float) -> float:
    d = abs(x) % period
    return min(d, period - d)


def _pair_distance(p, q, period: float) -> float:
    """Distance between chords modulo the period and endpoint swap."""
    straight = max(_mod_dist(p[0] - q[0], period), _mod_dist(p[1] - q[1], period))
    swapped = max(_mod_dist(p[0] - q[1], period), _mod_dist(p[1] - q[0], period))
    return min(straight, swapped)


def solve_closed_geodesics(gamma: BoundaryCurve, seeds, *,
                           tol: float = 1e-10) -> GeodesicReport:
    """Newton-converged orthogonal chords of a closed boundary curve.

    Solutions are deduplicated modulo the curve period and endpoint
    swap; each carries the local nullity of the 2×2 residual Jacobian
    (1 along a one-parameter family such as a circle's diameters, 0 at
    isolated chords such as an ellipse's axes)."""
    if not gamma.closed:
        raise SolverError("closed-curve geodesics need a closed curve")
    system = _chord_system(gamma)
    period = gamma.period
    min_sep = _MIN_SEPARATION * period
    report = GeodesicReport(solutions=[])
    found: list = []
    for k, seed in enumerate(seeds):
        y0 = np.asarray(seed, dtype=float)
        if _mod_dist(y0[0] - y0[1], period) < min_sep:
            report.messages.append(f"seed {k}: endpoints too close")
            continue
        try:
            result = newton_solve(system, y0, tol=tol)
        except EvaluationError as exc:
            report.messages.append(f"seed {k}: failed ({exc})")
            continue
        if not result.converged:
            report.messages.append(f"seed {k}: no convergence "
                                   f"({result.message})")
            continue
        ta, tb = gamma._wrap(result.x[0]), gamma._wrap(result.x[1])
        if _mod_dist(ta - tb, period) < min_sep:
            report.messages.append(f"seed {k}: collapsed chord, discarded")
            continue
        if ta > tb:
            ta, tb = tb, ta
        if any(_pair_distance((ta, tb), f, period) <= 1e-6 for f in found):
            report.messages.append(f"seed {k}: duplicate of an earlier chord")
            continue
        found.append((ta, tb))
        pa, pb = gamma.point(ta), gamma.point(tb)
        rv = transversality_residual(gamma, ta, tb)
        J = system.jac(np.array([ta, tb]))
        sv = np.linalg.svd(J, compute_uv=False)
        nullity = 2 - int(np.sum(sv >= 1e-6 * max(sv[0], 1.0)))
        report.solutions.append(ChordSolution(
            t_a=float(ta), t_b=float(tb),
            endpoint_a=(float(pa[0]), float(pa[1])),
            endpoint_b=(float(pb[0]), float(pb[1])),
            length=float(np.hypot(pb[0] - pa[0], pb[1] - pa[1])),
            residuals=tuple(float(r) for r in rv), nullity=nullity))
    if not report.solutions:
        report.messages.append("no solutions found from the given seeds")
    return report


def trace_closed_geodesic_family(gamma: BoundaryCurve, seed, *,
                                 step: float = 0.05, max_points: int = 2000,
                                 tol: float = 1e-10):
    """Continuation trace of a one-parameter chord family (m = n = 2
    with a rank-1 Jacobian along the family, e.g. a circle's
    diameters).  Loop closure is detected modulo the curve period."""
    system = _chord_system(gamma)
    period = gamma.period

    def dist(y, y0):
        return max(_mod_dist(y[0] - y0[0], period),
                   _mod_dist(y[1] - y0[1], period))

    return trace_family(system, np.asarray(seed, dtype=float), step=step,
                        max_points=max_points, tol=tol, distance=dist)
