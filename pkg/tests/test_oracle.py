"""Finite-difference cross-checks of the symbolic variational pipeline."""

import math

import numpy as np
import pytest

from freebound import (DiscreteActionConfig, ExprFunction, Lagrangian,
                       OracleError, SampledCurve, beam_lagrangian,
                       check_variation_decomposition, discrete_action,
                       endpoint_jet, first_variation_fd, length_lagrangian,
                       parse_expression, stencil_derivative)


def test_stencil_exact_on_polynomials():
    """Five-point 4th-order stencils differentiate quartics exactly."""
    xs = np.linspace(0.0, 2.0, 41)
    h = xs[1] - xs[0]
    vals = xs ** 4 - 2.0 * xs ** 3 + xs
    d1 = stencil_derivative(vals, h, 1)
    d2 = stencil_derivative(vals, h, 2)
    assert np.allclose(d1, 4 * xs ** 3 - 6 * xs ** 2 + 1, atol=1e-10)
    assert np.allclose(d2, 12 * xs ** 2 - 12 * xs, atol=1e-9)
    with pytest.raises(OracleError):
        stencil_derivative(vals, h, 3)
    with pytest.raises(OracleError):
        stencil_derivative(vals[:4], h, 1)


def test_stencil_fourth_order_convergence():
    errs = []
    for n in (80, 160):
        xs = np.linspace(0.0, 1.0, n + 1)
        d = stencil_derivative(np.sin(3 * xs), xs[1] - xs[0], 1)
        errs.append(np.max(np.abs(d - 3 * np.cos(3 * xs))))
    assert errs[0] / errs[1] > 12.0     # ~16 for a 4th-order method


def test_endpoint_jet():
    u = SampledCurve.from_function(lambda x: math.exp(0.5 * x), 0.0, 1.0, 400)
    left = endpoint_jet(u, "left", 3)
    right = endpoint_jet(u, "right", 3)
    assert left[0] == 0.0 and right[0] == 1.0
    for k in range(4):
        assert left[1 + k] == pytest.approx(0.5 ** k, abs=1e-7), k
        e = math.exp(0.5)
        assert right[1 + k] == pytest.approx(0.5 ** k * e, abs=1e-7), k


def test_discrete_action_matches_exact_integrals():
    # arclength of u = x on [0,1] is sqrt(2)
    line = SampledCurve.from_function(lambda x: x, 0.0, 1.0, 200)
    assert discrete_action(length_lagrangian(), line) == pytest.approx(
        math.sqrt(2.0), abs=1e-12)
    # beam density with kappa=2, rho=1 on u = x^2: integral of
    # 2*4/2 - x^2 over [0,1] = 4 - 1/3
    para = SampledCurve.from_function(lambda x: x * x, 0.0, 1.0, 200)
    got = discrete_action(beam_lagrangian(), para, values={"kappa": 2.0},
                          functions={"rho": ExprFunction(parse_expression("1"))})
    assert got == pytest.approx(4.0 - 1.0 / 3.0, abs=1e-9)


def test_discrete_action_validation():
    line = SampledCurve.from_function(lambda x: x, 0.0, 1.0, 20)
    with pytest.raises(OracleError):
        discrete_action(length_lagrangian(), line)
    big = SampledCurve.from_function(lambda x: x, 0.0, 1.0, 125)
    # odd interval count: Simpson needs an even one
    with pytest.raises(OracleError):
        discrete_action(length_lagrangian(), big)
    ok = SampledCurve.from_function(lambda x: x, 0.0, 1.0, 126)
    missing = discrete_action  # beam lagrangian without kappa/rho bindings
    with pytest.raises(OracleError):
        missing(beam_lagrangian(), ok)


def test_config_validation():
    with pytest.raises(OracleError):
        DiscreteActionConfig(n=8)
    with pytest.raises(OracleError):
        DiscreteActionConfig(eps=1e-2)
    with pytest.raises(OracleError):
        DiscreteActionConfig(eps=1e-9)


def test_first_variation_matches_analytic():
    """For S[u] = int u'^2/2, dS(u)v = int u' v' — check on sine waves."""
    lag = Lagrangian(order=1, density=parse_expression("p^2/2"))
    u = SampledCurve.from_function(lambda x: math.sin(x), 0.0, 2.0, 2000)
    v = SampledCurve.from_function(lambda x: x * (2.0 - x), 0.0, 2.0, 2000)
    got = first_variation_fd(lag, u, v)
    # reference: int_0^2 cos(x) (2 - 2x) dx on a much finer grid
    xs = np.linspace(0.0, 2.0, 20001)
    want = np.trapezoid(np.cos(xs) * (2.0 - 2.0 * xs), xs)
    assert got == pytest.approx(float(want), abs=1e-7)


def test_decomposition_identity_beam():
    rng = np.random.default_rng(8)
    c = rng.uniform(-1.0, 1.0, 5)
    u = SampledCurve.from_function(
        lambda x: c[0] + c[1] * x + c[2] * math.sin(2 * x)
        + c[3] * math.cos(3 * x) + c[4] * x * x, 0.0, 1.5, 2000)
    v = SampledCurve.from_function(
        lambda x: math.sin(1.7 * x) + 0.3 * x, 0.0, 1.5, 2000)
    rep = check_variation_decomposition(
        beam_lagrangian(), u, v, values={"kappa": 1.0},
        functions={"rho": ExprFunction(parse_expression("1"))})
    assert rep.rel_error <= 1e-4, str(rep)
    # Richardson consistency: halving eps must not move the value past
    # the quoted tolerance (it sits at the FD roundoff floor, ~1e-5 here)
    assert rep.eps_check <= 1e-4
    print("beam decomposition:", rep)


def test_decomposition_identity_length():
    u = SampledCurve.from_function(lambda x: 0.4 * math.cos(x), 0.0, 2.0, 2000)
    v = SampledCurve.from_function(lambda x: math.sin(x) - 0.2, 0.0, 2.0, 2000)
    rep = check_variation_decomposition(length_lagrangian(), u, v)
    assert rep.rel_error <= 1e-5, str(rep)


def test_decomposition_error_shrinks_under_refinement():
    u_f = lambda x: 0.3 * math.sin(2 * x) + 0.1 * x * x
    v_f = lambda x: math.cos(1.3 * x)
    errs = []
    for n in (128, 256):
        u = SampledCurve.from_function(u_f, 0.0, 1.0, n)
        v = SampledCurve.from_function(v_f, 0.0, 1.0, n)
        rep = check_variation_decomposition(
            beam_lagrangian(), u, v, cfg=DiscreteActionConfig(n=n),
            values={"kappa": 1.0},
            functions={"rho": ExprFunction(parse_expression("0"))})
        errs.append(rep.error)
    ratio = errs[0] / errs[1]
    assert ratio >= 3.5, errs
    print(f"refinement 128->256: errors {errs[0]:.3e} -> {errs[1]:.3e} "
          f"(ratio {ratio:.1f})")
