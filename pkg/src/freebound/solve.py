"""Generic numerics: damped Newton, pseudo-arclength continuation, quadrature.

Small dense systems only.  Jacobians default to finite differences; the
residual callables may raise :class:`~freebound.exprs.EvaluationError`
(e.g. a chart domain error), which the line searches treat as "step too
long" rather than as fatal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exprs import EvaluationError

__all__ = [
    "ResidualSystem",
    "NewtonResult",
    "ContinuationPath",
    "newton_solve",
    "trace_family",
    "quadrature",
    "SolverError",
]


class SolverError(ValueError):
    """Misuse of a solver (wrong shapes, invalid arguments)."""


@dataclass
class ResidualSystem:
    """A residual map R: R^n -> R^m with optional analytic Jacobian.

    ``box`` optionally declares per-coordinate bounds (lo, hi); the
    continuation tracer stops at its edge and the Newton line search
    never evaluates outside it.
    """

    fun: Callable[[np.ndarray], "np.ndarray | Sequence[float]"]
    n: int
    m: int
    jacobian: "Callable[[np.ndarray], np.ndarray] | None" = None
    fd_step: float = 1e-7
    box: "Sequence[tuple[float, float]] | None" = None

    def residual(self, x: np.ndarray) -> np.ndarray:
        r = np.asarray(self.fun(np.asarray(x, dtype=np.float64)),
                       dtype=np.float64)
        if r.shape != (self.m,):
            raise SolverError(
                f"residual returned shape {r.shape}, expected ({self.m},)")
        return r

    def jac(self, x: np.ndarray) -> np.ndarray:
        """Jacobian: analytic if supplied, else scaled forward differences."""
        if self.jacobian is not None:
            J = np.asarray(self.jacobian(x), dtype=np.float64)
            if J.shape != (self.m, self.n):
                raise SolverError(
                    f"jacobian returned shape {J.shape}, "
                    f"expected ({self.m}, {self.n})")
            return J
        r0 = self.residual(x)
        J = np.empty((self.m, self.n))
        for j in range(self.n):
            h = self.fd_step * (1.0 + abs(x[j]))
            xj = x.copy()
            xj[j] += h
            J[:, j] = (self.residual(xj) - r0) / h
        return J

    def inside_box(self, x: np.ndarray) -> bool:
        if self.box is None:
            return True
        return all(lo <= v <= hi for v, (lo, hi) in zip(x, self.box))


@dataclass
class NewtonResult:
    converged: bool
    x: np.ndarray
    residual_norm: float
    iterations: int
    norms: list = field(default_factory=list)
    message: str = ""


_DAMPING_FLOOR = 2.0 ** -20


def newton_solve(sys: ResidualSystem, x0, *, tol: float = 1e-10,
                 max_iter: int = 50) -> NewtonResult:
    """Damped Newton for square systems (m = n).

    Steps are halved (floor 2^-20) until the sup-norm of the residual
    decreases; rank-deficient Jacobians fall back to a least-squares
    step.  Success means ``||R(x)||_inf <= tol``.
    """
    if sys.m != sys.n:
        raise SolverError(
            f"newton_solve needs a square system, got m={sys.m}, n={sys.n}")
    x = np.asarray(x0, dtype=np.float64).copy()
    if x.shape != (sys.n,):
        raise SolverError(f"x0 must have shape ({sys.n},)")

    def norm_at(y):
        try:
            return float(np.max(np.abs(sys.residual(y)))), True
        except EvaluationError:
            return np.inf, False

    norm, ok = norm_at(x)
    if not ok:
        return NewtonResult(False, x, np.inf, 0, [np.inf],
                            "residual not evaluable at the initial guess")
    norms = [norm]
    for it in range(1, max_iter + 1):
        if norm <= tol:
            return NewtonResult(True, x, norm, it - 1, norms)
        try:
            J = sys.jac(x)
        except EvaluationError as exc:
            return NewtonResult(False, x, norm, it - 1, norms,
                                f"jacobian evaluation failed: {exc}")
        r = sys.residual(x)
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        lam = 1.0
        accepted = False
        while lam >= _DAMPING_FLOOR:
            xt = x + lam * step
            if sys.inside_box(xt):
                nt, ok = norm_at(xt)
                if ok and (nt < norm or nt <= tol):
                    x, norm = xt, nt
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            return NewtonResult(False, x, norm, it, norms,
                                "damping floor reached without decrease")
        norms.append(norm)
    converged = norm <= tol
    return NewtonResult(converged, x, norm, max_iter, norms,
                        "" if converged else "max iterations reached")


@dataclass
class ContinuationPath:
    """Result of :func:`trace_family`.

    ``termination`` is one of ``closed`` (returned within step/2 of the
    start), ``boundary`` (left the declared box), ``step_failure``
    (corrector kept failing after 8 step halvings), ``rank_deficient``
    (Jacobian lost rank n-1), ``max_points`` or ``empty`` (the seed
    could not be corrected onto the family).
    """

    points: np.ndarray
    tangents: np.ndarray
    steps: np.ndarray
    termination: str
    message: str = ""

    def __len__(self) -> int:
        return len(self.points)


def _family_tangent(J: np.ndarray, prev: "np.ndarray | None",
                    rank_tol: float = 1e-10):
    """Unit vector spanning ker(J) for a Jacobian of rank n-1.

    Returns (tangent, ok); ``ok`` False when the numerical rank is
    below n-1 (the family is not locally a curve).
    """
    _, sing, Vt = np.linalg.svd(J)
    n = Vt.shape[0]
    tangent = Vt[-1]
    if len(sing) >= n - 1 and n >= 2:
        smax = sing[0] if sing[0] > 0 else 1.0
        if sing[n - 2] < rank_tol * max(smax, 1.0):
            return tangent, False
    if prev is not None and float(tangent @ prev) < 0.0:
        tangent = -tangent
    return tangent, True


def trace_family(sys: ResidualSystem, seed, *, step: float = 0.05,
                 max_points: int = 2000, tol: float = 1e-10,
                 direction: int = 1,
                 distance: "Callable | None" = None) -> ContinuationPath:
    """Pseudo-arclength tracing of a one-parameter solution family.

    ``sys`` should have m = n-1 (a one-dimensional solution set); m = n
    with a rank-(n-1) Jacobian along the family is accepted too, which
    covers families produced by symmetric square systems.  The seed is
    first corrected onto the family; the path then alternates tangent
    prediction and orthogonally-constrained Newton correction.

    ``direction`` (+1/-1) flips which way along the family the trace
    starts.  ``distance(y, y0)``, when given, replaces the Euclidean
    metric in the closed-loop test — use it when coordinates are
    periodic so a loop is recognized modulo the period.
    """
    if not (sys.m == sys.n - 1 or sys.m == sys.n):
        raise SolverError(
            f"trace_family expects m in (n-1, n), got m={sys.m}, n={sys.n}")
    if step <= 0:
        raise SolverError("step must be positive")
    if direction not in (1, -1):
        raise SolverError("direction must be +1 or -1")

    def correct(y0, tangent, anchor):
        """Newton on R(y)=0 subject to tangent.(y - anchor)=0."""
        y = y0.copy()
        for _ in range(25):
            try:
                r = sys.residual(y)
            except EvaluationError:
                return None
            aug = np.concatenate([r, [float(tangent @ (y - anchor))]])
            if np.max(np.abs(aug)) <= tol:
                return y
            try:
                J = sys.jac(y)
            except EvaluationError:
                return None
            Jaug = np.vstack([J, tangent])
            delta, *_ = np.linalg.lstsq(Jaug, -aug, rcond=None)
            if not np.all(np.isfinite(delta)):
                return None
            y = y + delta
        return None

    x = np.asarray(seed, dtype=np.float64).copy()
    start = newton_solve(ResidualSystem(sys.fun, sys.n, sys.m, sys.jacobian,
                                        sys.fd_step, sys.box),
                         x, tol=tol, max_iter=60) \
        if sys.m == sys.n else None
    if start is not None:
        if not start.converged:
            return ContinuationPath(np.empty((0, sys.n)), np.empty((0, sys.n)),
                                    np.empty(0), "empty",
                                    "seed failed to converge onto the family")
        x = start.x
    else:
        # m = n-1: correct the seed with a frozen-direction constraint
        try:
            J = sys.jac(x)
        except EvaluationError:
            return ContinuationPath(np.empty((0, sys.n)), np.empty((0, sys.n)),
                                    np.empty(0), "empty",
                                    "jacobian not evaluable at the seed")
        tangent, _ = _family_tangent(J, None)
        corrected = correct(x, tangent, x)
        if corrected is None:
            return ContinuationPath(np.empty((0, sys.n)), np.empty((0, sys.n)),
                                    np.empty(0), "empty",
                                    "seed failed to converge onto the family")
        x = corrected

    points = [x]
    try:
        J = sys.jac(x)
    except EvaluationError:
        return ContinuationPath(np.asarray(points), np.empty((0, sys.n)),
                                np.empty(0), "rank_deficient",
                                "jacobian not evaluable at the first point")
    tangent, ok = _family_tangent(J, None)
    if not ok:
        return ContinuationPath(np.asarray(points), np.asarray([tangent]),
                                np.empty(0), "rank_deficient",
                                "family is not locally one-dimensional")
    tangent = direction * tangent
    tangents = [tangent]
    steps: list = []
    h = step
    termination = "max_points"
    message = ""

    while len(points) < max_points:
        predictor = x + h * tangent
        y = correct(predictor, tangent, predictor)
        if y is None:
            h *= 0.5
            if h < step * 2.0 ** -8:
                termination = "step_failure"
                message = "corrector failed after 8 step halvings"
                break
            continue
        if not sys.inside_box(y):
            termination = "boundary"
            message = "left the declared box"
            break
        # closed-loop detection against the start point
        gap = (float(np.linalg.norm(y - points[0])) if distance is None
               else float(distance(y, points[0])))
        if len(points) >= 10 and gap < step / 2:
            points.append(points[0].copy())
            tangents.append(tangent)
            steps.append(h)
            termination = "closed"
            break
        try:
            J = sys.jac(y)
        except EvaluationError:
            termination = "step_failure"
            message = "jacobian not evaluable on the family"
            break
        new_tangent, ok = _family_tangent(J, tangent)
        if not ok:
            termination = "rank_deficient"
            message = "Jacobian rank fell below n-1"
            break
        points.append(y)
        tangents.append(new_tangent)
        steps.append(h)
        x, tangent = y, new_tangent
        h = min(step, h * 1.5)

    return ContinuationPath(np.asarray(points), np.asarray(tangents),
                            np.asarray(steps), termination, message)


def quadrature(f: Callable, a: float, b: float, n: int) -> float:
    """Composite Simpson rule with n (even) intervals.

    ``f`` is called once with the full abscissa array and must return
    the sampled values; errors are re-raised with the interval noted.
    """
    n = int(n)
    if n < 2 or n % 2:
        raise SolverError(f"Simpson rule needs an even interval count, got {n}")
    a = float(a)
    b = float(b)
    xs = np.linspace(a, b, n + 1)
    try:
        ys = np.asarray(f(xs), dtype=np.float64)
    except EvaluationError as exc:
        raise type(exc)(f"{exc} (while integrating over [{a:g}, {b:g}])") from exc
    if ys.shape != xs.shape:
        raise SolverError("integrand must return one value per abscissa")
    h = (b - a) / n
    weights = np.ones(n + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return float(h / 3.0 * (weights @ ys))
