"""Symbolic core: parsing, printing, derivatives, substitution, tapes."""

import math

import numpy as np
import pytest

from freebound import (CallableFunction, DomainError, EvaluationError,
                       ExprFunction, JetPoint, ParseError,
                       UnboundSymbolError, compile_tape, evaluate,
                       exprs_equal_numeric, free_symbols, function_names,
                       jet_order, parse_expression, partial_derivative,
                       print_expression, substitute, total_derivative)
from freebound.exprs import normalize_constants


def test_parse_print_round_trip():
    texts = [
        "x + u*p",
        "kappa*q^2/2 - rho(x)*u",
        "sqrt(1 + p^2)",
        "sin(x)*cos(u) - exp(-x)",
        "(x + 1)^3/(u - 2)",
        "1e-05 + 2.5",
    ]
    for text in texts:
        e = parse_expression(text, parameters=("kappa",), functions=("rho",))
        again = parse_expression(print_expression(e),
                                 parameters=("kappa",), functions=("rho",))
        assert exprs_equal_numeric(e, again, seed=7)


def test_parse_rejects_undeclared_names():
    with pytest.raises(ParseError, match="unknown identifier 'kappa'"):
        parse_expression("kappa*q")
    with pytest.raises(ParseError, match="unknown function"):
        parse_expression("rho(x)")
    # declared names pass
    parse_expression("kappa*q", parameters=("kappa",))
    parse_expression("rho(x)", functions=("rho",))


def test_parse_error_positions_and_syntax():
    for bad in ("x +", "(x", "x ** u", "sin()", "2x"):
        with pytest.raises(ParseError):
            parse_expression(bad)


def test_evaluate_basics():
    e = parse_expression("x^2 + 3*u - p/2")
    v = evaluate(e, {"x": 2.0, "u": 1.0, "p": 4.0})
    assert v == pytest.approx(2.0 ** 2 + 3.0 - 2.0)
    with pytest.raises(UnboundSymbolError):
        evaluate(e, {"x": 2.0})


def test_evaluate_domain_errors():
    with pytest.raises(DomainError):
        evaluate(parse_expression("sqrt(x)"), {"x": -1.0})
    with pytest.raises(DomainError):
        evaluate(parse_expression("log(x)"), {"x": 0.0})
    with pytest.raises(DomainError):
        evaluate(parse_expression("1/x"), {"x": 0.0})


def test_partial_derivative_matches_finite_differences():
    """Randomized check of ∂/∂name against central differences."""
    rng = np.random.default_rng(42)
    texts = ["x^3*u - sin(p*x)", "exp(u/4)*cos(x)", "sqrt(4 + p^2 + q^2)",
             "x*u*p*q/(1 + x^2)"]
    for text in texts:
        e = parse_expression(text)
        for name in sorted(free_symbols(e)):
            d = partial_derivative(e, name)
            for _ in range(10):
                vals = {n: float(rng.uniform(-1.0, 1.0))
                        for n in free_symbols(e)}
                h = 1e-6
                up = dict(vals, **{name: vals[name] + h})
                dn = dict(vals, **{name: vals[name] - h})
                fd = (evaluate(e, up) - evaluate(e, dn)) / (2 * h)
                assert evaluate(d, vals) == pytest.approx(fd, abs=1e-7,
                                                          rel=1e-7)


def test_total_derivative_shifts_jet_order():
    # D(u) = p, D(p) = q, D(q) = r, D(r) = s
    for lower, upper in (("u", "p"), ("p", "q"), ("q", "r"), ("r", "s")):
        d = total_derivative(parse_expression(lower), 4)
        assert print_expression(d) == upper


def test_total_derivative_chain_rule():
    """D(f) = f_x + p f_u + q f_p + ... sampled numerically."""
    e = parse_expression("sin(u)*x + p^2")
    d = total_derivative(e, 2)
    expect = parse_expression("cos(u)*p*x + sin(u) + 2*p*q")
    assert exprs_equal_numeric(d, expect)


def test_total_derivative_of_function_application():
    e = parse_expression("rho(x)*u", functions=("rho",))
    d = total_derivative(e, 1)
    # rho'(x)*u + rho(x)*p
    rho = ExprFunction(parse_expression("sin(x)"))
    got = evaluate(d, {"x": 0.3, "u": 2.0, "p": -1.0}, {"rho": rho})
    want = math.cos(0.3) * 2.0 + math.sin(0.3) * (-1.0)
    assert got == pytest.approx(want, rel=1e-12)


def test_jet_order_and_free_symbols():
    e = parse_expression("kappa*q^2/2 - rho(x)*u", parameters=("kappa",),
                         functions=("rho",))
    assert jet_order(e) == 2
    assert free_symbols(e) == {"x", "u", "q", "kappa"}
    assert function_names(e) == {"rho"}
    assert jet_order(parse_expression("s + r")) == 4


def test_substitute():
    e = parse_expression("x^2 + u")
    s = substitute(e, {"x": parse_expression("t + 1", parameters=("t",)),
                       "u": parse_expression("t^2", parameters=("t",))})
    # (t+1)^2 + t^2
    t = 0.7
    assert evaluate(s, {"t": t}) == pytest.approx((t + 1) ** 2 + t ** 2)


def test_normalize_constants_folds():
    e = parse_expression("2*3 + x*1 + 0*u")
    n = normalize_constants(e)
    assert exprs_equal_numeric(e, n)
    assert "6" in print_expression(n)


def test_expr_function_derivatives():
    f = ExprFunction(parse_expression("x^3"))
    assert f(0, 2.0) == pytest.approx(8.0)
    assert f(1, 2.0) == pytest.approx(12.0)
    assert f(2, 2.0) == pytest.approx(12.0)
    assert f(3, 2.0) == pytest.approx(6.0)
    assert f(4, 2.0) == pytest.approx(0.0)


def test_callable_function_runs_out_of_derivatives():
    f = CallableFunction(math.sin, math.cos)
    assert f(1, 0.0) == pytest.approx(1.0)
    with pytest.raises(EvaluationError):
        f(2, 0.0)


def test_tape_agrees_with_evaluate():
    rng = np.random.default_rng(3)
    e = parse_expression("kappa*q^2/2 - rho(x)*u + sqrt(1 + p^2)",
                         parameters=("kappa",), functions=("rho",))
    tape = compile_tape(e, ("x", "u", "p", "q", "kappa"),
                        functions=("rho",))
    rho = ExprFunction(parse_expression("cos(2*x)"))
    for _ in range(50):
        vec = rng.uniform(-1.5, 1.5, 5)
        want = evaluate(e, {"x": vec[0], "u": vec[1], "p": vec[2],
                            "q": vec[3], "kappa": vec[4]}, {"rho": rho})
        assert tape.eval_vector(vec, [rho]) == pytest.approx(want,
                                                             rel=1e-12)


def test_tape_eval_many_matches_scalar_loop():
    e = parse_expression("x*u - p^2/3")
    tape = compile_tape(e, ("x", "u", "p"))
    rng = np.random.default_rng(11)
    table = rng.uniform(-2.0, 2.0, (40, 3))
    batch = tape.eval_many(table)
    for row, got in zip(table, batch):
        assert got == pytest.approx(tape.eval_vector(row), rel=1e-14)


def test_jet_point_order_and_values():
    j = JetPoint(0.0, 1.0, 2.0)
    assert j.order == 1
    assert j.values() == {"x": 0.0, "u": 1.0, "p": 2.0}
    assert JetPoint(0.0, 1.0).order == 0
    assert JetPoint(0.0, 1.0, 0.0, 0.0, 0.0, 0.0).order == 4


def test_exprs_equal_numeric_detects_difference():
    a = parse_expression("sin(x)^2")
    b = parse_expression("1 - cos(x)^2")
    c = parse_expression("1 + cos(x)^2")
    assert exprs_equal_numeric(a, b)
    assert not exprs_equal_numeric(a, c)
