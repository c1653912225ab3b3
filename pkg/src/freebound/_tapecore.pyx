# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tape evaluator.

Semantics are identical to ``freebound._tapepure`` (same opcodes and
status codes); this kernel exists purely for speed.  Scalar and batch
entry points evaluate a flat instruction tape over float64 registers.
"""

from libc.math cimport sin, cos, exp, log, sqrt, pow, isfinite, INFINITY

BACKEND = "compiled"

cdef enum:
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


cdef inline double _ipow(double a, int n) noexcept:
    cdef double out = 1.0
    cdef double base = a
    cdef int m = n
    if m < 0:
        return 1.0 / _ipow(a, -m)
    while m:
        if m & 1:
            out *= base
        base *= base
        m >>= 1
    return out


cdef int _run(int[::1] code, int[::1] ia, int[::1] ib, int[::1] ic,
              double[::1] consts, double[::1] values, list funcs,
              double[::1] buf, double* result) except -2:
    """Run the tape once; returns -1 on success else the failing instruction.

    On failure ``result`` holds the status code.
    """
    cdef Py_ssize_t n = code.shape[0]
    cdef Py_ssize_t i
    cdef int op, m
    cdef double v, a, d, ex
    cdef object fv
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
                result[0] = 1.0
                return <int>i
            v = buf[ia[i]] / d
        elif op == OP_NEG:
            v = -buf[ia[i]]
        elif op == OP_SIN:
            v = sin(buf[ia[i]])
        elif op == OP_COS:
            v = cos(buf[ia[i]])
        elif op == OP_EXP:
            a = buf[ia[i]]
            v = exp(a) if a < 709.8 else INFINITY
        elif op == OP_LOG:
            a = buf[ia[i]]
            if a <= 0.0:
                result[0] = 2.0
                return <int>i
            v = log(a)
        elif op == OP_SQRT:
            a = buf[ia[i]]
            if a < 0.0:
                result[0] = 3.0
                return <int>i
            v = sqrt(a)
        elif op == OP_POWI:
            a = buf[ia[i]]
            m = ib[i]
            if a == 0.0 and m < 0:
                result[0] = 4.0
                return <int>i
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
                result[0] = 3.0
                return <int>i
            if a == 0.0 and ex < 0.0:
                result[0] = 4.0
                return <int>i
            v = pow(a, ex)
        else:  # OP_CALL
            fv = <object>funcs[ib[i]]
            v = <double>fv(ic[i], buf[ia[i]])
        if not isfinite(v):
            result[0] = 5.0
            return <int>i
        buf[i] = v
    result[0] = buf[n - 1]
    return -1


def eval_scalar(int[::1] code, int[::1] ia, int[::1] ib, int[::1] ic,
                double[::1] consts, double[::1] values, list funcs,
                double[::1] scratch):
    """Evaluate one point.  Returns (status, instr, value)."""
    cdef double result = 0.0
    cdef int bad = _run(code, ia, ib, ic, consts, values, funcs, scratch,
                        &result)
    if bad >= 0:
        return <int>result, bad, 0.0
    return 0, code.shape[0] - 1, result


def eval_batch(int[::1] code, int[::1] ia, int[::1] ib, int[::1] ic,
               double[::1] consts, double[:, ::1] table, double[::1] out,
               list funcs, double[::1] scratch):
    """Evaluate each row of ``table`` into ``out``.

    Returns (status, row, instr); on nonzero status, ``row`` is the
    first offending sample point.
    """
    cdef Py_ssize_t nrows = table.shape[0]
    cdef Py_ssize_t row
    cdef double result = 0.0
    cdef int bad
    for row in range(nrows):
        bad = _run(code, ia, ib, ic, consts, table[row], funcs, scratch,
                   &result)
        if bad >= 0:
            return <int>result, <int>row, bad
        out[row] = result
    return 0, 0, 0
