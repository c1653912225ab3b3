"""Symbolic expression core for second-order jet calculus on a planar strip.

Expressions are immutable DAG nodes over the jet coordinates

    x, u, p, q, r, s

(read: base point, fiber value, and derivatives of increasing order),
arbitrary named parameters, and applications of named one-argument
functions carrying a derivative tag (``rho''(x)`` is the second
derivative of ``rho`` evaluated at ``x``).  The module provides

* a small recursive-descent parser / printer pair (round-trip safe),
* partial and truncated total derivatives,
* simultaneous substitution,
* a reference tree-walk evaluator with explicit domain errors, and
* a randomized numeric equality oracle used throughout the test-suite.

Shared subtrees stay shared: derivative and substitution walks are
memoized on node identity, so iterated total derivatives produce DAGs
rather than exponentially large trees.
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "JET_VARIABLES",
    "MAX_REJECT",
    "Expr",
    "Const",
    "Var",
    "FuncApp",
    "Unary",
    "Binary",
    "Pow",
    "JetPoint",
    "Bindings",
    "ExpressionError",
    "ParseError",
    "EvaluationError",
    "DomainError",
    "UnboundSymbolError",
    "SamplingError",
    "const",
    "var",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "powr",
    "sqrt_",
    "sin_",
    "cos_",
    "exp_",
    "log_",
    "func",
    "parse_expression",
    "print_expression",
    "partial_derivative",
    "total_derivative",
    "substitute",
    "normalize_constants",
    "evaluate",
    "exprs_equal_numeric",
    "free_symbols",
    "function_names",
    "jet_order",
    "ExprFunction",
    "CallableFunction",
    "constant_function",
]

# Deep total-derivative chains produce deep (if heavily shared) trees;
# the recursive walks below need headroom beyond CPython's default.
sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))

JET_VARIABLES = ("x", "u", "p", "q", "r", "s")
_JET_SET = frozenset(JET_VARIABLES)

# Order of each jet coordinate: u is the fiber value, s its fourth
# derivative.  x and any parameter names have order 0 for the purposes
# of the truncation checks.
_JET_ORDER = {"u": 0, "p": 1, "q": 2, "r": 3, "s": 4}
_JET_NEXT = {"u": "p", "p": "q", "q": "r", "r": "s"}

#: Maximum number of rejected sample points tolerated by
#: :func:`exprs_equal_numeric` before it gives up.
MAX_REJECT = 1000

_HALF = Fraction(1, 2)


class ExpressionError(ValueError):
    """Base class for all expression-layer errors."""


class ParseError(ExpressionError):
    """Syntax or symbol error while parsing; carries a 0-based column."""

    def __init__(self, message: str, column: int):
        super().__init__(f"{message} (column {column})")
        self.column = column


class EvaluationError(ExpressionError):
    """Base class for evaluation failures."""


class DomainError(EvaluationError):
    """A numeric operation left its domain (division by zero, log of a
    nonpositive number, fractional power of a negative number, overflow
    to a nonfinite value).  ``expr`` is the offending subexpression."""

    def __init__(self, message: str, expr: "Expr | None" = None):
        super().__init__(message)
        self.expr = expr


class UnboundSymbolError(EvaluationError):
    """A variable or function required by the expression is not bound."""


class SamplingError(EvaluationError):
    """The equality oracle rejected more than ``MAX_REJECT`` samples."""


# ---------------------------------------------------------------------------
# nodes
# ---------------------------------------------------------------------------


class Expr:
    """Abstract immutable expression node."""

    __slots__ = ("_hash", "_free", "_funcs")

    _hash: int
    _free: frozenset
    _funcs: frozenset

    def __hash__(self) -> int:
        return self._hash

    # Structural equality (with identity fast path).  Needed so nodes can
    # key hash tables during common-subexpression elimination.
    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Expr):
            return NotImplemented
        if self._hash != other._hash:
            return False
        return self._key() == other._key()

    def _key(self):  # pragma: no cover - abstract
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {print_expression(self)!r}>"

    # operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return powr(self, exponent)


_EMPTY = frozenset()


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float):
        self.value = float(value)
        self._hash = hash(("c", self.value))
        self._free = _EMPTY
        self._funcs = _EMPTY

    def _key(self):
        return ("c", self.value)


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._hash = hash(("v", name))
        self._free = frozenset((name,))
        self._funcs = _EMPTY

    def _key(self):
        return ("v", self.name)


class FuncApp(Expr):
    """Application ``f^(order)(arg)`` of a named exogenous function."""

    __slots__ = ("fname", "order", "arg")

    def __init__(self, fname: str, order: int, arg: Expr):
        self.fname = fname
        self.order = int(order)
        self.arg = arg
        self._hash = hash(("f", fname, self.order, arg._hash))
        self._free = arg._free
        self._funcs = arg._funcs | frozenset((fname,))

    def _key(self):
        return ("f", self.fname, self.order, self.arg)


class Unary(Expr):
    """op in {'neg', 'sin', 'cos', 'exp', 'log'}."""

    __slots__ = ("op", "arg")

    def __init__(self, op: str, arg: Expr):
        self.op = op
        self.arg = arg
        self._hash = hash(("u", op, arg._hash))
        self._free = arg._free
        self._funcs = arg._funcs

    def _key(self):
        return ("u", self.op, self.arg)


class Binary(Expr):
    """op in {'+', '-', '*', '/'}."""

    __slots__ = ("op", "a", "b")

    def __init__(self, op: str, a: Expr, b: Expr):
        self.op = op
        self.a = a
        self.b = b
        self._hash = hash(("b", op, a._hash, b._hash))
        self._free = a._free | b._free
        self._funcs = a._funcs | b._funcs

    def _key(self):
        return ("b", self.op, self.a, self.b)


class Pow(Expr):
    """Power with a constant rational exponent."""

    __slots__ = ("base", "exponent")

    def __init__(self, base: Expr, exponent: Fraction):
        self.base = base
        self.exponent = Fraction(exponent)
        self._hash = hash(("p", base._hash, self.exponent))
        self._free = base._free
        self._funcs = base._funcs

    def _key(self):
        return ("p", self.base, self.exponent)


# ---------------------------------------------------------------------------
# smart constructors (local constant folding only; no rewriting)
# ---------------------------------------------------------------------------

ZERO = Const(0.0)
ONE = Const(1.0)

_VARS: dict = {}


def var(name: str) -> Var:
    v = _VARS.get(name)
    if v is None:
        v = _VARS[name] = Var(name)
    return v


def const(value: float) -> Const:
    return Const(value)


def as_expr(value) -> Expr:
    """Coerce a number (or pass an Expr through) to an expression."""
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, Fraction)):
        return Const(float(value))
    raise TypeError(f"cannot convert {value!r} to Expr")


def _is_const(e: Expr, v: float | None = None) -> bool:
    return isinstance(e, Const) and (v is None or e.value == v)


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        v = a.value + b.value
        if math.isfinite(v):
            return Const(v)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Binary("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if a is b or a == b:
        return ZERO
    if isinstance(a, Const) and isinstance(b, Const):
        v = a.value - b.value
        if math.isfinite(v):
            return Const(v)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Binary("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        v = a.value * b.value
        if math.isfinite(v):
            return Const(v)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    return Binary("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        v = a.value / b.value
        if math.isfinite(v):
            return Const(v)
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    return Binary("/", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def powr(base: Expr, exponent) -> Expr:
    """``base ** exponent`` for a constant rational exponent."""
    e = Fraction(exponent)
    if e == 0:
        return ONE
    if e == 1:
        return base
    if isinstance(base, Const):
        v = base.value
        ok = v > 0.0 or (v != 0.0 and e.denominator == 1) or (v == 0.0 and e > 0)
        if ok:
            try:
                w = float(v ** float(e)) if e.denominator > 1 else float(v ** e.numerator)
            except OverflowError:
                w = math.inf
            if math.isfinite(w):
                return Const(w)
    return Pow(base, e)


def sqrt_(a: Expr) -> Expr:
    return powr(a, Fraction(1, 2))


def _fold_unary(op: str, fn, a: Expr) -> Expr:
    if isinstance(a, Const):
        try:
            v = fn(a.value)
        except (ValueError, OverflowError):
            v = math.nan
        if math.isfinite(v):
            return Const(v)
    return Unary(op, a)


def sin_(a: Expr) -> Expr:
    return _fold_unary("sin", math.sin, a)


def cos_(a: Expr) -> Expr:
    return _fold_unary("cos", math.cos, a)


def exp_(a: Expr) -> Expr:
    return _fold_unary("exp", math.exp, a)


def log_(a: Expr) -> Expr:
    return _fold_unary("log", math.log, a)


def func(fname: str, arg: Expr, order: int = 0) -> FuncApp:
    """Application of the named exogenous function (``order`` = derivative tag)."""
    return FuncApp(fname, order, arg)


# ---------------------------------------------------------------------------
# queries
# ---------------------------------------------------------------------------


def free_symbols(expr: Expr) -> frozenset:
    """Names of all variables and parameters occurring in ``expr``."""
    return expr._free


def function_names(expr: Expr) -> frozenset:
    """Names of all exogenous functions applied inside ``expr``."""
    return expr._funcs


def jet_order(expr: Expr) -> int:
    """Highest jet order among u, p, q, r, s present; -1 if none occur.

    ``x`` and parameter names do not contribute.
    """
    order = -1
    for name in expr._free:
        k = _JET_ORDER.get(name)
        if k is not None and k > order:
            order = k
    return order


# ---------------------------------------------------------------------------
# derivatives and substitution
# ---------------------------------------------------------------------------


def partial_derivative(expr: Expr, name: str) -> Expr:
    """Partial derivative with respect to the variable ``name``.

    Named functions are differentiated through their derivative tag:
    d/dx rho(x) = rho'(x).
    """
    memo: dict = {}

    def d(e: Expr) -> Expr:
        if name not in e._free:
            return ZERO
        got = memo.get(id(e))
        if got is not None:
            return got
        if isinstance(e, Var):
            out = ONE if e.name == name else ZERO
        elif isinstance(e, FuncApp):
            out = mul(FuncApp(e.fname, e.order + 1, e.arg), d(e.arg))
        elif isinstance(e, Unary):
            da = d(e.arg)
            if e.op == "neg":
                out = neg(da)
            elif e.op == "sin":
                out = mul(cos_(e.arg), da)
            elif e.op == "cos":
                out = neg(mul(sin_(e.arg), da))
            elif e.op == "exp":
                out = mul(e, da)
            else:  # log
                out = div(da, e.arg)
        elif isinstance(e, Binary):
            da, db = d(e.a), d(e.b)
            if e.op == "+":
                out = add(da, db)
            elif e.op == "-":
                out = sub(da, db)
            elif e.op == "*":
                out = add(mul(da, e.b), mul(e.a, db))
            else:  # /
                out = div(sub(mul(da, e.b), mul(e.a, db)), powr(e.b, 2))
        elif isinstance(e, Pow):
            da = d(e.base)
            coeff = Const(float(e.exponent))
            out = mul(mul(coeff, powr(e.base, e.exponent - 1)), da)
        else:  # Const — unreachable (no free vars)
            out = ZERO
        memo[id(e)] = out
        return out

    return d(expr)


def total_derivative(expr: Expr, k: int) -> Expr:
    """Truncated total derivative of order ``k`` (1 <= k <= 4).

    Treats the jet coordinates as functions of x along a curve:
    u' = p, p' = q, q' = r, r' = s.  ``expr`` must not contain jet
    variables of order >= k, otherwise the truncation would need a jet
    coordinate beyond those carried here.
    """
    if not 1 <= int(k) <= 4:
        raise ExpressionError(f"total derivative order must be 1..4, got {k}")
    order = jet_order(expr)
    if order >= k:
        raise ExpressionError(
            f"total derivative of order {k} needs an argument of jet order "
            f"< {k}; argument has order {order}"
        )
    out = partial_derivative(expr, "x")
    for lower, upper in _JET_NEXT.items():
        termd = partial_derivative(expr, lower)
        if not _is_const(termd, 0.0):
            out = add(out, mul(var(upper), termd))
    return out


def substitute(expr: Expr, mapping: Mapping[str, "Expr | float"]) -> Expr:
    """Simultaneously replace variables by expressions (or numbers).

    Function names are untouched, but arguments of function
    applications are rewritten: substituting x -> g into rho(x) yields
    rho(g).
    """
    repl = {k: as_expr(v) for k, v in mapping.items()}
    names = frozenset(repl)
    memo: dict = {}

    def walk(e: Expr) -> Expr:
        if not (e._free & names):
            return e
        got = memo.get(id(e))
        if got is not None:
            return got
        if isinstance(e, Var):
            out = repl.get(e.name, e)
        elif isinstance(e, FuncApp):
            out = FuncApp(e.fname, e.order, walk(e.arg))
        elif isinstance(e, Unary):
            a = walk(e.arg)
            out = {"neg": neg, "sin": sin_, "cos": cos_, "exp": exp_, "log": log_}[e.op](a)
        elif isinstance(e, Binary):
            a, b = walk(e.a), walk(e.b)
            out = {"+": add, "-": sub, "*": mul, "/": div}[e.op](a, b)
        elif isinstance(e, Pow):
            out = powr(walk(e.base), e.exponent)
        else:
            out = e
        memo[id(e)] = out
        return out

    return walk(expr)


# ---------------------------------------------------------------------------
# jets and bindings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JetPoint:
    """A point of the (up to) fourth-order jet space over the plane.

    Higher slots may be ``None`` when only a lower-order jet is meant.
    """

    x: float
    u: float
    p: float | None = None
    q: float | None = None
    r: float | None = None
    s: float | None = None

    @property
    def order(self) -> int:
        for k, name in ((4, "s"), (3, "r"), (2, "q"), (1, "p")):
            if getattr(self, name) is not None:
                return k
        return 0

    def values(self) -> dict:
        """Bound jet coordinates as a name->value dict (skips ``None``)."""
        out = {}
        for name in JET_VARIABLES:
            v = getattr(self, name)
            if v is not None:
                out[name] = float(v)
        return out


class FunctionValue:
    """Protocol for numeric values of named functions.

    A function value is called as ``fv(order, x)`` and returns the
    ``order``-th derivative at ``x``.
    """

    def __call__(self, order: int, x: float) -> float:  # pragma: no cover
        raise NotImplementedError


class ExprFunction(FunctionValue):
    """Function value backed by a one-variable expression."""

    def __init__(self, expr: Expr, variable: str = "x",
                 functions: "Mapping[str, FunctionValue] | None" = None):
        extra = free_symbols(expr) - {variable}
        if extra:
            raise ExpressionError(
                f"function body may only depend on {variable!r}; "
                f"found {sorted(extra)}")
        self.variable = variable
        self.functions = dict(functions or {})
        self._derivs = [expr]

    def expression(self, order: int = 0) -> Expr:
        while len(self._derivs) <= order:
            self._derivs.append(
                partial_derivative(self._derivs[-1], self.variable))
        return self._derivs[order]

    def __call__(self, order: int, x: float) -> float:
        return evaluate(self.expression(order), {self.variable: x},
                        functions=self.functions)


class CallableFunction(FunctionValue):
    """Function value from explicit per-order callables."""

    def __init__(self, *derivatives: Callable[[float], float]):
        if not derivatives:
            raise ExpressionError("need at least the 0th derivative")
        self._fns = derivatives

    def __call__(self, order: int, x: float) -> float:
        if order >= len(self._fns):
            raise EvaluationError(
                f"function value provides derivatives up to order "
                f"{len(self._fns) - 1}, requested {order}")
        return float(self._fns[order](x))


def constant_function(value: float) -> FunctionValue:
    """Function value of a constant (all derivatives vanish)."""
    return _ConstFunction(float(value))


class _ConstFunction(FunctionValue):
    def __init__(self, value: float):
        self.value = float(value)

    def __call__(self, order: int, x: float) -> float:
        return self.value if order == 0 else 0.0


@dataclass(frozen=True)
class Bindings:
    """Numeric bindings for evaluation: variable values plus function values."""

    values: Mapping[str, float]
    functions: Mapping[str, FunctionValue] = field(default_factory=dict)

    @staticmethod
    def for_jet(jet: JetPoint, params: "Mapping[str, float] | None" = None,
                functions: "Mapping[str, FunctionValue] | None" = None) -> "Bindings":
        vals = jet.values()
        if params:
            vals.update({k: float(v) for k, v in params.items()})
        return Bindings(vals, dict(functions or {}))


# ---------------------------------------------------------------------------
# evaluation (reference tree walk; the tape backends mirror its semantics)
# ---------------------------------------------------------------------------


def evaluate(expr: Expr, values, functions=None) -> float:
    """Evaluate ``expr`` at the given bindings.

    ``values`` may be a :class:`Bindings` or a plain name->float mapping
    (then ``functions`` optionally maps function names to
    :class:`FunctionValue` objects).  Raises :class:`UnboundSymbolError`
    for missing symbols and :class:`DomainError` when an operation
    leaves its domain or produces a nonfinite value.
    """
    if isinstance(values, Bindings):
        functions = values.functions
        values = values.values
    functions = functions or {}

    missing = expr._free - values.keys()
    if missing:
        raise UnboundSymbolError(f"unbound variables: {sorted(missing)}")
    fmissing = expr._funcs - functions.keys()
    if fmissing:
        raise UnboundSymbolError(f"unbound functions: {sorted(fmissing)}")

    memo: dict = {}

    def ev(e: Expr) -> float:
        got = memo.get(id(e))
        if got is not None:
            return got
        if isinstance(e, Const):
            v = e.value
        elif isinstance(e, Var):
            v = float(values[e.name])
        elif isinstance(e, FuncApp):
            v = float(functions[e.fname](e.order, ev(e.arg)))
        elif isinstance(e, Unary):
            a = ev(e.arg)
            if e.op == "neg":
                v = -a
            elif e.op == "sin":
                v = math.sin(a)
            elif e.op == "cos":
                v = math.cos(a)
            elif e.op == "exp":
                v = math.exp(a) if a < 709.8 else math.inf
            else:  # log
                if a <= 0.0:
                    raise DomainError(f"log of nonpositive value {a!r}", e)
                v = math.log(a)
        elif isinstance(e, Binary):
            a, b = ev(e.a), ev(e.b)
            if e.op == "+":
                v = a + b
            elif e.op == "-":
                v = a - b
            elif e.op == "*":
                v = a * b
            else:
                if b == 0.0:
                    raise DomainError("division by zero", e)
                v = a / b
        elif isinstance(e, Pow):
            a = ev(e.base)
            ex = e.exponent
            if ex.denominator == 1:
                n = ex.numerator
                if a == 0.0 and n < 0:
                    raise DomainError("zero base with negative exponent", e)
                v = _ipow(a, n)
            else:
                if a < 0.0:
                    raise DomainError(
                        f"fractional power of negative value {a!r}", e)
                if a == 0.0 and ex < 0:
                    raise DomainError("zero base with negative exponent", e)
                v = math.sqrt(a) if ex == _HALF else math.pow(a, float(ex))
        else:  # pragma: no cover
            raise TypeError(type(e))
        if not math.isfinite(v):
            raise DomainError("nonfinite intermediate value", e)
        memo[id(e)] = v
        return v

    return ev(expr)


def _ipow(a: float, n: int) -> float:
    """Integer power by binary exponentiation (mirrored in the tape kernels)."""
    if n < 0:
        return 1.0 / _ipow(a, -n)
    out = 1.0
    base = a
    while n:
        if n & 1:
            out *= base
        base *= base
        n >>= 1
    return out


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*'*)"
    r"|(?P<op>[-+*/^()])"
)

_BUILTIN_FUNCS = {"sin": sin_, "cos": cos_, "exp": exp_, "log": log_, "sqrt": sqrt_}


class _Parser:
    def __init__(self, text: str, variables, functions):
        self.text = text
        self.variables = variables
        self.functions = functions
        self.tokens: list = []
        pos = 0
        n = len(text)
        while pos < n:
            if text[pos].isspace():
                pos += 1
                continue
            m = _TOKEN.match(text, pos)
            if m is None:
                raise ParseError(f"unexpected character {text[pos]!r}", pos)
            kind = m.lastgroup
            self.tokens.append((kind, m.group(), pos))
            pos = m.end()
        self.tokens.append(("end", "", n))
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, symbol: str):
        kind, text, col = self.peek()
        if kind != "op" or text != symbol:
            raise ParseError(f"expected {symbol!r}", col)
        return self.advance()

    # grammar: expr := term (('+'|'-') term)*
    def parse_expr(self) -> Expr:
        out = self.parse_term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                rhs = self.parse_term()
                out = add(out, rhs) if text == "+" else sub(out, rhs)
            else:
                return out

    def parse_term(self) -> Expr:
        out = self.parse_unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                rhs = self.parse_unary()
                out = mul(out, rhs) if text == "*" else div(out, rhs)
            else:
                return out

    def parse_unary(self) -> Expr:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return neg(self.parse_unary())
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            return powr(base, self.parse_exponent())
        return base

    def parse_exponent(self) -> Fraction:
        # exponent := NUMBER | '(' ['-'] NUMBER ['/' NUMBER] ')'
        kind, text, col = self.peek()
        if kind == "num":
            self.advance()
            return Fraction(text)
        if kind == "op" and text == "(":
            self.advance()
            sign = 1
            kind, text, col = self.peek()
            if kind == "op" and text == "-":
                self.advance()
                sign = -1
            kind, text, col = self.peek()
            if kind != "num":
                raise ParseError("exponent must be a rational constant", col)
            self.advance()
            value = Fraction(text)
            kind, text, col = self.peek()
            if kind == "op" and text == "/":
                self.advance()
                kind, text, col = self.peek()
                if kind != "num" or "." in text or "e" in text or "E" in text:
                    raise ParseError("exponent denominator must be an integer", col)
                self.advance()
                value = value / int(text)
            self.expect_op(")")
            return sign * value
        raise ParseError("exponent must be a rational constant", col)

    def parse_atom(self) -> Expr:
        kind, text, col = self.advance()
        if kind == "num":
            return Const(float(text))
        if kind == "op" and text == "(":
            inner = self.parse_expr()
            self.expect_op(")")
            return inner
        if kind == "name":
            name = text.rstrip("'")
            order = len(text) - len(name)
            nxt_kind, nxt_text, _ = self.peek()
            is_call = nxt_kind == "op" and nxt_text == "("
            if is_call:
                self.advance()
                arg = self.parse_expr()
                self.expect_op(")")
                if name in _BUILTIN_FUNCS:
                    if order:
                        raise ParseError(
                            f"derivative tags apply to named functions, "
                            f"not builtin {name!r}", col)
                    return _BUILTIN_FUNCS[name](arg)
                if name not in self.functions:
                    raise ParseError(f"unknown function {name!r}", col)
                return FuncApp(name, order, arg)
            if order:
                raise ParseError(
                    f"derivative tag on {name!r} requires an argument", col)
            if name not in self.variables:
                raise ParseError(f"unknown identifier {name!r}", col)
            return var(name)
        raise ParseError(f"syntax error at {text!r}" if text else
                         "unexpected end of input", col)


def parse_expression(text: str, *, variables: "Iterable[str] | None" = None,
                     parameters: Iterable[str] = (),
                     functions: Iterable[str] = ()) -> Expr:
    """Parse an expression over the given symbols.

    ``variables`` defaults to the jet coordinates ``x u p q r s``;
    ``parameters`` are extra allowed symbols; ``functions`` are names
    that may be applied (with optional prime derivative tags, e.g.
    ``rho''(x)``).  Unknown symbols raise :class:`ParseError` with a
    0-based column.
    """
    allowed = set(JET_VARIABLES if variables is None else variables)
    allowed.update(parameters)
    parser = _Parser(text, allowed, set(functions))
    out = parser.parse_expr()
    kind, text_, col = parser.peek()
    if kind != "end":
        raise ParseError(f"unexpected trailing input {text_!r}", col)
    return out


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def print_expression(expr: Expr) -> str:
    """Render an expression to parseable text (inverse of the parser up
    to structural normalization of constants)."""

    def fmt_const(v: float) -> str:
        if v == int(v) and abs(v) < 1e16:
            return str(int(v))
        return repr(v)

    def visit(e: Expr, prec: int) -> str:
        if isinstance(e, Const):
            if e.value < 0 or (e.value == 0 and math.copysign(1, e.value) < 0):
                body = "-" + fmt_const(-e.value)
                return f"({body})" if prec > _PREC_NEG else body
            return fmt_const(e.value)
        if isinstance(e, Var):
            return e.name
        if isinstance(e, FuncApp):
            primes = "'" * e.order
            return f"{e.fname}{primes}({visit(e.arg, 0)})"
        if isinstance(e, Unary):
            if e.op == "neg":
                body = "-" + visit(e.arg, _PREC_NEG + 1)
                return f"({body})" if prec > _PREC_NEG else body
            return f"{e.op}({visit(e.arg, 0)})"
        if isinstance(e, Binary):
            if e.op in "+-":
                mine = _PREC_ADD
                left = visit(e.a, mine)
                right = visit(e.b, mine + 1)
            else:
                mine = _PREC_MUL
                left = visit(e.a, mine)
                right = visit(e.b, mine + 1)
            body = f"{left}{e.op}{right}" if e.op in "*/" else f"{left} {e.op} {right}"
            return f"({body})" if prec > mine else body
        if isinstance(e, Pow):
            ex = e.exponent
            if ex == Fraction(1, 2):
                return f"sqrt({visit(e.base, 0)})"
            base = visit(e.base, _PREC_ATOM)
            if ex.denominator == 1 and ex >= 0:
                etxt = str(ex.numerator)
            elif ex.denominator == 1:
                etxt = f"({ex.numerator})"
            else:
                etxt = f"({ex.numerator}/{ex.denominator})"
            body = f"{base}^{etxt}"
            return f"({body})" if prec > _PREC_POW else body
        raise TypeError(type(e))  # pragma: no cover

    return visit(expr, 0)


# ---------------------------------------------------------------------------
# light normalization
# ---------------------------------------------------------------------------


def normalize_constants(expr: Expr) -> Expr:
    """Collect numeric factors through products, quotients and negations.

    A value-preserving cleanup pass: rebuilds the expression bottom-up,
    floats constant coefficients outward, orders product factors with
    parameters before jet variables, and moves a negated term to the
    right of a sum — so derivative outputs like ``kappa*(2*q)*2/4``
    print as ``kappa*q`` and ``-rho(x) + s*kappa`` as
    ``kappa*s - rho(x)``.
    """
    memo: dict = {}

    def negish(e: Expr) -> bool:
        if isinstance(e, Const):
            return e.value < 0.0
        if isinstance(e, Unary) and e.op == "neg":
            return True
        if isinstance(e, Binary) and e.op in ("*", "/"):
            return negish(e.a)
        return False

    def negate(e: Expr) -> Expr:
        if isinstance(e, Const):
            return Const(-e.value)
        if isinstance(e, Unary) and e.op == "neg":
            return e.arg
        if isinstance(e, Binary) and e.op == "*":
            return mul(negate(e.a), e.b)
        if isinstance(e, Binary) and e.op == "/":
            return div(negate(e.a), e.b)
        return neg(e)

    def order_factors(e: Expr) -> Expr:
        if not (isinstance(e, Binary) and e.op == "*"):
            return e
        factors: list = []

        def flat(m: Expr) -> None:
            if isinstance(m, Binary) and m.op == "*":
                flat(m.a)
                flat(m.b)
            else:
                factors.append(m)

        flat(e)

        def rank(f: Expr) -> int:
            syms = free_symbols(f)
            return 0 if syms and not (syms & _JET_SET) else 1

        ordered = sorted(factors, key=rank)  # stable
        if ordered == factors:
            return e
        out = ordered[0]
        for f in ordered[1:]:
            out = mul(out, f)
        return out

    def split(e: Expr) -> "tuple[float, Expr]":
        """Represent e as coeff * core with core free of leading constants."""
        if isinstance(e, Const):
            return e.value, ONE
        if isinstance(e, Unary) and e.op == "neg":
            c, core = split(e.arg)
            return -c, core
        if isinstance(e, Binary) and e.op == "*":
            ca, a = split(e.a)
            cb, b = split(e.b)
            if not math.isfinite(ca * cb):
                return 1.0, e
            return ca * cb, mul(a, b)
        if isinstance(e, Binary) and e.op == "/":
            ca, a = split(e.a)
            cb, b = split(e.b)
            if cb == 0.0 or not math.isfinite(ca / cb):
                return 1.0, e
            if _is_const(b, 1.0):
                return ca / cb, a
            return ca / cb, div(a, b)
        return 1.0, e

    def walk(e: Expr) -> Expr:
        got = memo.get(id(e))
        if got is not None:
            return got
        if isinstance(e, (Const, Var)):
            out = e
        elif isinstance(e, FuncApp):
            out = FuncApp(e.fname, e.order, walk(e.arg))
        elif isinstance(e, Unary):
            arg = walk(e.arg)
            out = {"neg": neg, "sin": sin_, "cos": cos_, "exp": exp_,
                   "log": log_}[e.op](arg)
        elif isinstance(e, Binary):
            a, b = walk(e.a), walk(e.b)
            if e.op == "+" and negish(a) and not negish(b):
                out = sub(b, negate(a))
            else:
                out = {"+": add, "-": sub, "*": mul, "/": div}[e.op](a, b)
        elif isinstance(e, Pow):
            out = powr(walk(e.base), e.exponent)
        else:  # pragma: no cover
            out = e
        if isinstance(out, (Binary, Unary)):
            c, core = split(out)
            core2 = order_factors(core)
            if c != 1.0 or core2 is not out:
                out = mul(Const(c), core2)
        memo[id(e)] = out
        return out

    return walk(expr)


# ---------------------------------------------------------------------------
# randomized numeric equality
# ---------------------------------------------------------------------------


def _random_function(rng: np.random.Generator) -> FunctionValue:
    """A smooth random test function (cubic with bounded coefficients)."""
    c = rng.uniform(-1.0, 1.0, size=4)
    x = var("x")
    body = as_expr(c[0]) + c[1] * x + c[2] * x * x + c[3] * x * x * x
    return ExprFunction(body)


def exprs_equal_numeric(a: Expr, b: Expr, *, trials: int = 64,
                        tol: float = 1e-9, seed: int = 0,
                        ranges: "Mapping[str, tuple] | None" = None,
                        functions: "Mapping[str, FunctionValue] | None" = None,
                        value_cap: float = 1e12) -> bool:
    """Randomized numeric equality test.

    Samples all free symbols of both expressions uniformly (default
    range [-2, 2], overridable per symbol via ``ranges``), evaluates
    both sides, and compares with mixed tolerance
    ``|va - vb| <= tol * (1 + |va| + |vb|)``.  Sample points where
    either side raises a :class:`DomainError` or exceeds ``value_cap``
    in magnitude are rejected and redrawn; more than :data:`MAX_REJECT`
    rejections raise :class:`SamplingError`.  Named functions missing
    from ``functions`` are bound to seeded random cubics.
    """
    rng = np.random.default_rng(seed)
    names = sorted(a._free | b._free)
    ranges = ranges or {}
    funcs = dict(functions or {})
    for fname in sorted(a._funcs | b._funcs):
        if fname not in funcs:
            funcs[fname] = _random_function(rng)

    rejected = 0
    done = 0
    while done < trials:
        vals = {}
        for name in names:
            lo, hi = ranges.get(name, (-2.0, 2.0))
            vals[name] = float(rng.uniform(lo, hi))
        try:
            va = evaluate(a, vals, funcs)
            vb = evaluate(b, vals, funcs)
        except DomainError:
            rejected += 1
            if rejected > MAX_REJECT:
                raise SamplingError(
                    f"exceeded {MAX_REJECT} rejected samples "
                    f"(expressions may be singular on the sampling box)")
            continue
        if abs(va) > value_cap or abs(vb) > value_cap:
            rejected += 1
            if rejected > MAX_REJECT:
                raise SamplingError(
                    f"exceeded {MAX_REJECT} rejected samples "
                    f"(values exceed cap {value_cap:g})")
            continue
        if abs(va - vb) > tol * (1.0 + abs(va) + abs(vb)):
            return False
        done += 1
    return True
