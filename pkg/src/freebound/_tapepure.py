"""Pure-Python tape evaluator.

Mirrors the semantics of the optional compiled kernel
(``freebound._tapecore``) exactly: same opcodes, same status codes,
same domain checks.  Scalar evaluation is a plain Python loop; batch
evaluation is vectorized per instruction with numpy.

Status codes: 0 ok, 1 division by zero, 2 log domain, 3 fractional
power of a negative base, 4 zero base with a negative exponent,
5 nonfinite value.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "pure"

OP_LOADC = 0
OP_LOADV = 1
OP_ADD = 2
OP_SUB = 3
OP_MUL = 4
OP_DIV = 5
OP_NEG = 6
OP_SIN = 7
OP_COS = 8
OP_EXP = 9
OP_LOG = 10
OP_SQRT = 11
OP_POWI = 12
OP_POWF = 13
OP_CALL = 14


def _ipow(a: float, n: int) -> float:
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


def eval_scalar(code, ia, ib, ic, consts, values, funcs, scratch):
    """Evaluate one point.  Returns (status, instr, value)."""
    n = len(code)
    buf = [0.0] * n
    for i in range(n):
        op = code[i]
        if op == OP_LOADC:
            v = consts[ia[i]]
        elif op == OP_LOADV:
            v = values[ia[i]]
        elif op == OP_ADD:
            v = buf[ia[i]] + buf[ib[i]]
        elif op == OP_SUB:
            v = buf[ia[i]] - buf[ib[i]]
        elif op == OP_MUL:
            v = buf[ia[i]] * buf[ib[i]]
        elif op == OP_DIV:
            d = buf[ib[i]]
            if d == 0.0:
                return 1, i, 0.0
            v = buf[ia[i]] / d
        elif op == OP_NEG:
            v = -buf[ia[i]]
        elif op == OP_SIN:
            v = math.sin(buf[ia[i]])
        elif op == OP_COS:
            v = math.cos(buf[ia[i]])
        elif op == OP_EXP:
            a = buf[ia[i]]
            v = math.exp(a) if a < 709.8 else math.inf
        elif op == OP_LOG:
            a = buf[ia[i]]
            if a <= 0.0:
                return 2, i, 0.0
            v = math.log(a)
        elif op == OP_SQRT:
            a = buf[ia[i]]
            if a < 0.0:
                return 3, i, 0.0
            v = math.sqrt(a)
        elif op == OP_POWI:
            a = buf[ia[i]]
            m = ib[i]
            if a == 0.0 and m < 0:
                return 4, i, 0.0
            if m == 2:
                v = a * a
            elif m == 3:
                v = a * a * a
            else:
                v = _ipow(a, m)
        elif op == OP_POWF:
            a = buf[ia[i]]
            ex = consts[ib[i]]
            if a < 0.0:
                return 3, i, 0.0
            if a == 0.0 and ex < 0.0:
                return 4, i, 0.0
            v = math.pow(a, ex)
        else:  # OP_CALL
            v = float(funcs[ib[i]](ic[i], buf[ia[i]]))
        if not math.isfinite(v):
            return 5, i, 0.0
        buf[i] = v
    return 0, n - 1, buf[n - 1]


def eval_batch(code, ia, ib, ic, consts, table, out, funcs, scratch):
    """Evaluate ``table`` (rows of variable values) into ``out``.

    Vectorized per instruction.  Returns (status, row, instr); on a
    nonzero status, ``row`` is the first offending sample point.
    """
    table = np.asarray(table, dtype=np.float64)
    nrows = table.shape[0]
    n = len(code)
    buf = [None] * n
    for i in range(n):
        op = code[i]
        if op == OP_LOADC:
            v = np.full(nrows, consts[ia[i]])
        elif op == OP_LOADV:
            v = table[:, ia[i]].copy()
        elif op == OP_ADD:
            v = buf[ia[i]] + buf[ib[i]]
        elif op == OP_SUB:
            v = buf[ia[i]] - buf[ib[i]]
        elif op == OP_MUL:
            v = buf[ia[i]] * buf[ib[i]]
        elif op == OP_DIV:
            d = buf[ib[i]]
            bad = d == 0.0
            if bad.any():
                return 1, int(np.argmax(bad)), i
            v = buf[ia[i]] / d
        elif op == OP_NEG:
            v = -buf[ia[i]]
        elif op == OP_SIN:
            v = np.sin(buf[ia[i]])
        elif op == OP_COS:
            v = np.cos(buf[ia[i]])
        elif op == OP_EXP:
            a = buf[ia[i]]
            with np.errstate(over="ignore"):
                v = np.exp(a)
        elif op == OP_LOG:
            a = buf[ia[i]]
            bad = a <= 0.0
            if bad.any():
                return 2, int(np.argmax(bad)), i
            v = np.log(a)
        elif op == OP_SQRT:
            a = buf[ia[i]]
            bad = a < 0.0
            if bad.any():
                return 3, int(np.argmax(bad)), i
            v = np.sqrt(a)
        elif op == OP_POWI:
            a = buf[ia[i]]
            m = int(ib[i])
            if m < 0:
                bad = a == 0.0
                if bad.any():
                    return 4, int(np.argmax(bad)), i
            v = a.astype(np.float64) ** m
        elif op == OP_POWF:
            a = buf[ia[i]]
            ex = consts[ib[i]]
            bad = a < 0.0
            if bad.any():
                return 3, int(np.argmax(bad)), i
            if ex < 0.0:
                bad = a == 0.0
                if bad.any():
                    return 4, int(np.argmax(bad)), i
            v = a ** ex
        else:  # OP_CALL
            fv = funcs[ib[i]]
            order = int(ic[i])
            arg = buf[ia[i]]
            v = np.empty(nrows)
            for row in range(nrows):
                v[row] = fv(order, float(arg[row]))
        bad = ~np.isfinite(v)
        if bad.any():
            return 5, int(np.argmax(bad)), i
        buf[i] = v
    out[:] = buf[n - 1]
    return 0, 0, 0
