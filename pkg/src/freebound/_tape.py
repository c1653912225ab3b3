"""Compilation of expressions to flat evaluation tapes.

A tape is a register-style instruction list in dependency order with
common subexpressions merged (structural hashing).  Tapes are evaluated
by one of two interchangeable kernels:

* ``freebound._tapecore`` — Cython, built at install time when a C
  toolchain is available;
* ``freebound._tapepure`` — pure Python / numpy, always available.

The compiled kernel is preferred; set ``FREEBOUND_BACKEND=pure`` or
``FREEBOUND_BACKEND=compiled`` to force a choice (forcing ``compiled``
raises if the extension is missing).  Both kernels implement the same
opcodes, domain checks and status codes, so results agree to floating
point roundoff and error behavior agrees exactly.
"""

from __future__ import annotations

import math
import os
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .exprs import (
    Binary,
    Bindings,
    Const,
    DomainError,
    Expr,
    ExpressionError,
    FuncApp,
    Pow,
    Unary,
    UnboundSymbolError,
    Var,
    free_symbols,
    function_names,
)
from . import _tapepure

__all__ = ["Tape", "compile_tape", "backend_name"]

_FORCED = os.environ.get("FREEBOUND_BACKEND")

if _FORCED == "pure":
    _kernel = _tapepure
elif _FORCED == "compiled":
    from . import _tapecore as _kernel  # raises ImportError if not built
else:
    try:
        from . import _tapecore as _kernel
    except ImportError:
        _kernel = _tapepure


def backend_name() -> str:
    """Name of the active tape kernel: ``"compiled"`` or ``"pure"``."""
    return _kernel.BACKEND


_P = _tapepure  # opcode namespace (shared numbering)

_UNARY_OPS = {
    "neg": _P.OP_NEG,
    "sin": _P.OP_SIN,
    "cos": _P.OP_COS,
    "exp": _P.OP_EXP,
    "log": _P.OP_LOG,
}
_BINARY_OPS = {"+": _P.OP_ADD, "-": _P.OP_SUB, "*": _P.OP_MUL, "/": _P.OP_DIV}

_STATUS_MESSAGES = {
    1: "division by zero",
    2: "log of nonpositive value",
    3: "fractional power of negative value",
    4: "zero base with negative exponent",
    5: "nonfinite intermediate value",
}


class Tape:
    """A compiled expression over a fixed variable/function signature."""

    def __init__(self, code, ia, ib, ic, consts, variables, functions, nodes):
        self.code = code
        self.ia = ia
        self.ib = ib
        self.ic = ic
        self.consts = consts
        self.variables = tuple(variables)
        self.functions = tuple(functions)
        self.nodes = nodes
        self._slot = {name: i for i, name in enumerate(self.variables)}
        self._scratch = np.empty(len(code), dtype=np.float64)

    def __len__(self) -> int:
        return len(self.code)

    # -- building argument vectors ------------------------------------
    def _vector(self, values) -> np.ndarray:
        vec = np.empty(len(self.variables), dtype=np.float64)
        try:
            for name, i in self._slot.items():
                vec[i] = values[name]
        except KeyError as exc:
            raise UnboundSymbolError(f"unbound variable: {exc.args[0]!r}") from None
        return vec

    def _functions(self, functions) -> list:
        functions = functions or {}
        try:
            return [functions[name] for name in self.functions]
        except KeyError as exc:
            raise UnboundSymbolError(f"unbound function: {exc.args[0]!r}") from None

    # -- evaluation ----------------------------------------------------
    def eval(self, values, functions=None) -> float:
        """Evaluate at a name->value mapping (or :class:`Bindings`)."""
        if isinstance(values, Bindings):
            functions = values.functions
            values = values.values
        return self.eval_vector(self._vector(values), self._functions(functions))

    def eval_vector(self, vec: np.ndarray, funcs: list = ()) -> float:
        """Evaluate at a vector ordered like ``self.variables`` (hot path)."""
        status, instr, value = _kernel.eval_scalar(
            self.code, self.ia, self.ib, self.ic, self.consts,
            np.ascontiguousarray(vec, dtype=np.float64), list(funcs),
            self._scratch)
        if status:
            raise DomainError(_STATUS_MESSAGES[status], self.nodes[instr])
        return value

    def eval_many(self, table: np.ndarray, funcs: list = ()) -> np.ndarray:
        """Evaluate each row of ``table`` (shape (N, nvars)) at once."""
        table = np.ascontiguousarray(table, dtype=np.float64)
        if table.ndim != 2 or table.shape[1] != len(self.variables):
            raise ExpressionError(
                f"table must have shape (N, {len(self.variables)})")
        out = np.empty(table.shape[0], dtype=np.float64)
        status, row, instr = _kernel.eval_batch(
            self.code, self.ia, self.ib, self.ic, self.consts, table, out,
            list(funcs), self._scratch)
        if status:
            raise DomainError(
                f"{_STATUS_MESSAGES[status]} at sample row {row}",
                self.nodes[instr])
        return out


def compile_tape(expr: Expr, variables: Sequence[str],
                 functions: "Sequence[str] | None" = None) -> Tape:
    """Compile ``expr`` to a :class:`Tape` over the given variable order.

    ``variables`` fixes the argument-vector layout; every free symbol of
    the expression must appear in it.  ``functions`` fixes the function
    table order (default: sorted names occurring in the expression).
    """
    varset = set(variables)
    missing = free_symbols(expr) - varset
    if missing:
        raise ExpressionError(
            f"expression uses variables {sorted(missing)} not in tape "
            f"signature {tuple(variables)}")
    if functions is None:
        functions = tuple(sorted(function_names(expr)))
    fmissing = function_names(expr) - set(functions)
    if fmissing:
        raise ExpressionError(
            f"expression uses functions {sorted(fmissing)} not in tape "
            f"function table {tuple(functions)}")

    var_slot = {name: i for i, name in enumerate(variables)}
    fun_slot = {name: i for i, name in enumerate(functions)}

    code: list = []
    ia: list = []
    ib: list = []
    ic: list = []
    consts: list = []
    nodes: list = []
    const_ix: dict = {}
    reg: dict = {}  # Expr -> register (structural keys: CSE)

    def intern_const(v: float) -> int:
        key = (v, math.copysign(1.0, v))
        got = const_ix.get(key)
        if got is None:
            got = const_ix[key] = len(consts)
            consts.append(v)
        return got

    def emit(op: int, a: int, b: int, c: int, node: Expr) -> int:
        code.append(op)
        ia.append(a)
        ib.append(b)
        ic.append(c)
        nodes.append(node)
        return len(code) - 1

    # iterative post-order so deep chains cannot hit the recursion limit
    stack = [(expr, False)]
    while stack:
        e, ready = stack.pop()
        if e in reg:
            continue
        if not ready:
            stack.append((e, True))
            if isinstance(e, Binary):
                stack.append((e.a, False))
                stack.append((e.b, False))
            elif isinstance(e, (Unary, FuncApp)):
                stack.append((e.arg, False))
            elif isinstance(e, Pow):
                stack.append((e.base, False))
            continue
        if isinstance(e, Const):
            idx = emit(_P.OP_LOADC, intern_const(e.value), 0, 0, e)
        elif isinstance(e, Var):
            idx = emit(_P.OP_LOADV, var_slot[e.name], 0, 0, e)
        elif isinstance(e, FuncApp):
            idx = emit(_P.OP_CALL, reg[e.arg], fun_slot[e.fname], e.order, e)
        elif isinstance(e, Unary):
            idx = emit(_UNARY_OPS[e.op], reg[e.arg], 0, 0, e)
        elif isinstance(e, Binary):
            idx = emit(_BINARY_OPS[e.op], reg[e.a], reg[e.b], 0, e)
        elif isinstance(e, Pow):
            ex = e.exponent
            if ex == Fraction(1, 2):
                idx = emit(_P.OP_SQRT, reg[e.base], 0, 0, e)
            elif ex.denominator == 1:
                if not -2**31 < ex.numerator < 2**31:
                    raise ExpressionError(f"integer exponent too large: {ex}")
                idx = emit(_P.OP_POWI, reg[e.base], ex.numerator, 0, e)
            else:
                idx = emit(_P.OP_POWF, reg[e.base], intern_const(float(ex)), 0, e)
        else:  # pragma: no cover
            raise TypeError(type(e))
        reg[e] = idx

    return Tape(
        np.asarray(code, dtype=np.intc),
        np.asarray(ia, dtype=np.intc),
        np.asarray(ib, dtype=np.intc),
        np.asarray(ic, dtype=np.intc),
        np.asarray(consts, dtype=np.float64),
        variables, functions, nodes)
