"""Euler-Lagrange expressions and natural boundary conditions.

For a second-order density L(x, u, p, q) the first variation of the
action, after two integrations by parts, splits into an interior part
with integrand E·v and a boundary bracket

    [ L_q · v' + (L_p - D(L_q)) · v ]  at the endpoints,

so the Euler-Lagrange expression is E = L_u - D(L_p) + D²(L_q) and the
natural boundary conditions at a free endpoint are the vanishing of the
bracket coefficients.  First-order densities are the special case with
no q dependence: E = L_u - D(L_p), bracket = L_p · v (transversality).

Boundary-adapted versions are produced by pulling the density back
through a prolonged chart transformation (the density transforms with
the extra factor D(x-component), since the volume element dx does) and
taking the NBC pair of the pulled-back density.
"""

from __future__ import annotations

from dataclasses import dataclass

from .exprs import (
    Expr,
    ExpressionError,
    JET_VARIABLES,
    const,
    free_symbols,
    function_names,
    jet_order,
    mul,
    normalize_constants,
    partial_derivative,
    sub,
    substitute,
    total_derivative,
)
from .prolongation import ProlongedTransformation

__all__ = [
    "Lagrangian",
    "NbcPair",
    "VariationalError",
    "euler_lagrange",
    "natural_boundary_conditions",
    "pullback_lagrangian",
    "nbc_in_chart",
]


class VariationalError(ExpressionError):
    """Invalid Lagrangian declaration."""


@dataclass(frozen=True)
class Lagrangian:
    """A density L dx of order 1 (L = L(x,u,p)) or 2 (L = L(x,u,p,q)).

    Symbols that are not jet variables must be declared in
    ``parameters``; named functions (like a load rho(x)) in
    ``functions``.
    """

    order: int
    density: Expr
    parameters: tuple = ()
    functions: tuple = ()

    def __post_init__(self):
        if self.order not in (1, 2):
            raise VariationalError("Lagrangian order must be 1 or 2")
        k = jet_order(self.density)
        if k > self.order:
            raise VariationalError(
                f"density uses jet variables of order {k}, above the "
                f"declared Lagrangian order {self.order}")
        allowed = set(JET_VARIABLES[:self.order + 2]) | set(self.parameters)
        extra = free_symbols(self.density) - allowed
        if extra:
            raise VariationalError(
                f"undeclared symbols in density: {sorted(extra)}")
        undeclared = function_names(self.density) - set(self.functions)
        if undeclared:
            raise VariationalError(
                f"undeclared functions in density: {sorted(undeclared)}")


@dataclass(frozen=True)
class NbcPair:
    """Boundary-bracket coefficients: ``first`` multiplies v' and
    ``second`` multiplies v in the first variation's endpoint term."""

    first: Expr
    second: Expr


def euler_lagrange(lag: Lagrangian) -> Expr:
    """The Euler-Lagrange expression of the density.

    Order 1: L_u - D(L_p) (jet order <= 2); order 2:
    L_u - D(L_p) + D²(L_q) (jet order <= 4)."""
    L = lag.density
    Lu = partial_derivative(L, "u")
    Lp = partial_derivative(L, "p")
    if lag.order == 1:
        expr = sub(Lu, total_derivative(Lp, 2))
    else:
        Lq = partial_derivative(L, "q")
        expr = sub(Lu, total_derivative(Lp, 3)) + \
            total_derivative(total_derivative(Lq, 3), 4)
    return normalize_constants(expr)


def natural_boundary_conditions(lag: Lagrangian) -> NbcPair:
    """Coefficients of the surviving boundary terms for free endpoint
    values: (L_q, L_p - D(L_q)); for order 1, (0, L_p)."""
    L = lag.density
    Lp = partial_derivative(L, "p")
    if lag.order == 1:
        return NbcPair(const(0.0), normalize_constants(Lp))
    Lq = partial_derivative(L, "q")
    return NbcPair(normalize_constants(Lq),
                   normalize_constants(sub(Lp, total_derivative(Lq, 3))))


def pullback_lagrangian(lag: Lagrangian,
                        chart: ProlongedTransformation) -> Lagrangian:
    """The density in chart coordinates.

    Substitutes the chart components and jet lifts for (x, u, p, q) and
    multiplies by D(x-component), the stretch of the volume element
    along graphs.  The result is a Lagrangian of the same order in the
    chart's jet variables (which reuse the canonical names)."""
    if lag.order > 2:
        raise VariationalError("pullback implemented for orders 1 and 2")
    mapping = {"x": chart.base.xbar, "u": chart.base.ubar, "p": chart.F}
    if lag.order == 2:
        mapping["q"] = chart.G
    density = mul(substitute(lag.density, mapping),
                  total_derivative(chart.base.xbar, 1))
    params = tuple(sorted(set(lag.parameters) | set(chart.base.parameters)))
    return Lagrangian(order=lag.order, density=density,
                      parameters=params, functions=lag.functions)


def nbc_in_chart(lag: Lagrangian, chart: ProlongedTransformation) -> NbcPair:
    """Natural boundary conditions of the pulled-back density, in chart
    jet variables; meant for evaluation on the boundary {x = 0}."""
    return natural_boundary_conditions(pullback_lagrangian(lag, chart))
