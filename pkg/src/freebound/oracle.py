"""Finite-difference verification of the symbolic variational objects.

Everything here deliberately avoids the symbolic derivative pipeline on
the left-hand side: the action is a plain quadrature of stencil
derivatives, and the first variation is a central ε-difference of that
number.  The decomposition check then compares this against
∫ E(u)·v dx plus the boundary bracket [nbc₁·v′ + nbc₂·v], built from
the Euler-Lagrange and natural-boundary expressions — so a bug in the
integration-by-parts chain shows up as a mismatch between two very
different computations of the same quantity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._tape import compile_tape
from .exprs import ExpressionError
from .geometry import SampledCurve
from .variational import (Lagrangian, euler_lagrange,
                          natural_boundary_conditions)

__all__ = [
    "OracleError",
    "DiscreteActionConfig",
    "DecompositionReport",
    "discrete_action",
    "first_variation_fd",
    "check_variation_decomposition",
    "stencil_derivative",
    "endpoint_jet",
]


class OracleError(ExpressionError):
    pass


@dataclass(frozen=True)
class DiscreteActionConfig:
    """Grid size and variation step for the finite-difference oracle."""

    n: int = 2000
    eps: float = 1e-6

    def __post_init__(self):
        if self.n < 32:
            raise OracleError(f"need at least 32 intervals, got {self.n}")
        if not 1e-8 <= self.eps <= 1e-4:
            raise OracleError(
                f"variation step must lie in [1e-8, 1e-4], got {self.eps:g}")


@lru_cache(maxsize=256)
def _weights(offsets: tuple, k: int) -> np.ndarray:
    """Stencil weights w with f^(k)(x_i) ~ h^-k * sum w_j f(x_{i+s_j}).

    Solved exactly from the moment conditions sum w_j s_j^m / m! = [m=k];
    a stencil on s points is accurate to order s - k."""
    s = np.asarray(offsets, dtype=float)
    m = len(s)
    A = np.vander(s, m, increasing=True).T
    A /= np.array([math.factorial(i) for i in range(m)])[:, None]
    rhs = np.zeros(m)
    rhs[k] = 1.0
    return np.linalg.solve(A, rhs)


def stencil_derivative(vals: np.ndarray, h: float, k: int) -> np.ndarray:
    """4th-order finite-difference derivative array (k = 1 or 2).

    Central five-point stencils inside, one-sided stencils of the same
    order at the first and last two nodes."""
    if k not in (1, 2):
        raise OracleError("stencil_derivative handles k = 1 or 2")
    vals = np.asarray(vals, dtype=float)
    n = len(vals)
    width = k + 4                       # one-sided points for order 4
    if n < max(5, width):
        raise OracleError("grid too short for 4th-order stencils")
    out = np.empty(n)
    w_central = _weights((-2, -1, 0, 1, 2), k)
    core = sum(w_central[j] * vals[j:n - 4 + j] for j in range(5))
    out[2:n - 2] = core
    for i in (0, 1):
        w = _weights(tuple(range(-i, width - i)), k)
        out[i] = w @ vals[:width]
    for i in (n - 2, n - 1):
        back = i - (n - width)
        w = _weights(tuple(range(-back, width - back)), k)
        out[i] = w @ vals[n - width:]
    return out / h ** k


def endpoint_jet(u: SampledCurve, side: str, order: int) -> tuple:
    """(x, u, u', ..., u^(order)) at an endpoint.

    First and second derivatives use one-sided 4th-order stencils; the
    third and fourth come from the curve's windowed least-squares fits.
    A plain one-sided u''' stencil amplifies roundoff like n³ — at
    n=2000 that noise alone reaches ~1e-4 relative and grows under
    refinement — while the wide-window fit converges at the same rate
    without it."""
    vals = u.u
    n = len(vals)
    out = []
    for k in range(1, min(order, 2) + 1):
        width = k + 4
        if n < width:
            raise OracleError("grid too short for endpoint stencils")
        if side == "left":
            w = _weights(tuple(range(width)), k)
            out.append(float(w @ vals[:width]) / u.h ** k)
        else:
            w = _weights(tuple(range(-width + 1, 1)), k)
            out.append(float(w @ vals[-width:]) / u.h ** k)
    for k in range(3, order + 1):
        arr = u.derivative(k)
        out.append(float(arr[0] if side == "left" else arr[-1]))
    if side == "left":
        return (u.a, float(vals[0]), *out)
    return (u.b, float(vals[-1]), *out)


def _simpson_weights(n_points: int, h: float) -> np.ndarray:
    if n_points < 3 or n_points % 2 == 0:
        raise OracleError(
            "Simpson quadrature needs an even interval count "
            f"(odd point count), got {n_points} points")
    w = np.ones(n_points)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


_JET_NAMES = ("x", "u", "p", "q", "r", "s")


def _jet_table(lag_vars: tuple, u: SampledCurve, stencil_max: int) -> np.ndarray:
    """Sampled jet columns for the given variable names.

    Derivatives up to ``stencil_max`` come from the 4th-order stencils;
    higher ones (needed by Euler-Lagrange expressions, up to u⁗) from
    the windowed least-squares fits of SampledCurve, which stay stable
    where plain high-order stencils would drown in roundoff."""
    cols = []
    for name in lag_vars:
        k = _JET_NAMES.index(name)
        if k == 0:
            cols.append(u.x)
        elif k == 1:
            cols.append(u.u)
        elif k - 1 <= stencil_max:
            cols.append(stencil_derivative(u.u, u.h, k - 1))
        else:
            cols.append(u.derivative(k - 1))
    return np.column_stack(cols)


def _binding_lists(lag: Lagrangian, values, functions):
    values = dict(values or {})
    functions = dict(functions or {})
    missing = [p for p in lag.parameters if p not in values]
    if missing:
        raise OracleError(f"missing parameter values: {missing}")
    missing_f = [f for f in lag.functions if f not in functions]
    if missing_f:
        raise OracleError(f"missing function bindings: {missing_f}")
    return ([float(values[p]) for p in lag.parameters],
            [functions[f] for f in lag.functions])


def discrete_action(lag: Lagrangian, u: SampledCurve,
                    cfg: "DiscreteActionConfig | None" = None, *,
                    values=None, functions=None) -> float:
    """Composite-Simpson value of ∫ L(x, u, u′, u″) dx on the grid.

    u′ and u″ come from 4th-order stencils (central inside, one-sided
    at the edges), so the value converges at 4th order in h for smooth
    curves."""
    if cfg is None:
        cfg = DiscreteActionConfig()
    if len(u.x) - 1 < 32:
        raise OracleError("need at least 32 grid intervals")
    lag_vars = _JET_NAMES[:2 + lag.order]
    pvals, fvals = _binding_lists(lag, values, functions)
    table = _jet_table(lag_vars, u, stencil_max=2)
    if pvals:
        table = np.hstack([table,
                           np.tile(pvals, (table.shape[0], 1))])
    tape = compile_tape(lag.density, lag_vars + tuple(lag.parameters),
                        functions=tuple(lag.functions))
    dens = tape.eval_many(table, fvals)
    return float(_simpson_weights(len(u.x), u.h) @ dens)


def first_variation_fd(lag: Lagrangian, u: SampledCurve, v: SampledCurve,
                       cfg: "DiscreteActionConfig | None" = None, *,
                       values=None, functions=None) -> float:
    """Central ε-difference (S(u+εv) − S(u−εv)) / (2ε)."""
    if cfg is None:
        cfg = DiscreteActionConfig()
    eps = cfg.eps
    plus = discrete_action(lag, u + eps * v, cfg,
                           values=values, functions=functions)
    minus = discrete_action(lag, u + (-eps) * v, cfg,
                            values=values, functions=functions)
    return (plus - minus) / (2.0 * eps)


@dataclass(frozen=True)
class DecompositionReport:
    lhs: float                 # finite-difference first variation
    rhs: float                 # ∫ E(u)·v + boundary bracket
    interior: float            # the ∫ E(u)·v part alone
    boundary: float            # the bracket part alone
    error: float
    rel_error: float
    eps_check: float           # |lhs(ε) − lhs(ε/2)|, Richardson consistency

    def __str__(self):
        return (f"lhs={self.lhs:.10g} rhs={self.rhs:.10g} "
                f"error={self.error:.3e} rel={self.rel_error:.3e} "
                f"eps_check={self.eps_check:.3e}")


def check_variation_decomposition(lag: Lagrangian, u: SampledCurve,
                                  v: SampledCurve,
                                  cfg: "DiscreteActionConfig | None" = None, *,
                                  values=None, functions=None
                                  ) -> DecompositionReport:
    """Compare the finite-difference first variation against
    ∫ E(u)·v dx + [nbc₁·v′ + nbc₂·v] evaluated from the symbolic
    Euler-Lagrange and boundary expressions."""
    if cfg is None:
        cfg = DiscreteActionConfig()
    lhs = first_variation_fd(lag, u, v, cfg, values=values,
                             functions=functions)
    half = DiscreteActionConfig(cfg.n, cfg.eps / 2.0) \
        if cfg.eps / 2.0 >= 1e-8 else cfg
    lhs_half = first_variation_fd(lag, u, v, half, values=values,
                                  functions=functions)

    pvals, fvals = _binding_lists(lag, values, functions)
    el = euler_lagrange(lag)
    el_vars = _JET_NAMES[:2 + 2 * lag.order]
    table = _jet_table(el_vars, u, stencil_max=2)
    if pvals:
        table = np.hstack([table, np.tile(pvals, (table.shape[0], 1))])
    el_tape = compile_tape(el, el_vars + tuple(lag.parameters),
                           functions=tuple(lag.functions))
    integrand = el_tape.eval_many(table, fvals) * v.u
    interior = float(_simpson_weights(len(u.x), u.h) @ integrand)

    nbc = natural_boundary_conditions(lag)
    bc_order = 1 + 2 * (lag.order - 1)      # jet order entering the bracket
    bc_vars = _JET_NAMES[:2 + max(bc_order, 1)]
    t1 = compile_tape(nbc.first, bc_vars + tuple(lag.parameters),
                      functions=tuple(lag.functions))
    t2 = compile_tape(nbc.second, bc_vars + tuple(lag.parameters),
                      functions=tuple(lag.functions))
    boundary = 0.0
    for side, sign in (("right", 1.0), ("left", -1.0)):
        jet_u = endpoint_jet(u, side, max(bc_order, 1))
        jet_v = endpoint_jet(v, side, 1)
        vec = np.array(jet_u[:len(bc_vars)] + tuple(pvals))
        b1 = t1.eval_vector(vec, fvals)
        b2 = t2.eval_vector(vec, fvals)
        boundary += sign * (b1 * jet_v[2] + b2 * jet_v[1])

    rhs = interior + boundary
    err = abs(lhs - rhs)
    # The identity lhs = interior + boundary stays meaningful when the
    # two pieces cancel (u close to critical for this v), so the
    # relative scale is the largest participating magnitude, not the
    # possibly tiny net value.
    scale = max(abs(lhs), abs(rhs), abs(interior), abs(boundary), 1e-10)
    return DecompositionReport(lhs=lhs, rhs=rhs, interior=interior,
                               boundary=boundary, error=err,
                               rel_error=err / scale,
                               eps_check=abs(lhs - lhs_half))
