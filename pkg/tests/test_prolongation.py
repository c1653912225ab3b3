"""Jet lifts of planar transformations.

The oracle for F, G, H is direct: push an explicit curve through the
point transformation, reparametrize its image as a graph, and compare
the lifted jet against difference quotients of the image function.
"""

import numpy as np
import pytest

from freebound import (JetPoint, PointTransformation, ProlongationError,
                       compile_tape, compose, contact_residual, evaluate,
                       parse_expression, prolong)


def _pt(xbar_text, ubar_text, **kw):
    return PointTransformation(parse_expression(xbar_text),
                               parse_expression(ubar_text), **kw)


def _image_jet_fd(phi, f, x0, h=2e-3):
    """(xbar, ubar, slope, curvature-rate, third) of the image of the
    graph of f near x0, by 5-point central differences along the image
    parametrized by x.  The step balances truncation against the
    eps/h**3 roundoff of the third-derivative stencil."""
    xs = x0 + h * np.arange(-2.0, 3.0)
    pts = np.array([[evaluate(phi.xbar, {"x": x, "u": f(x)}),
                     evaluate(phi.ubar, {"x": x, "u": f(x)})]
                    for x in xs])
    xb, ub = pts[:, 0], pts[:, 1]
    # derivatives of xbar(x), ubar(x) at x0
    w1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12 * h)
    w2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12 * h * h)
    w3 = np.array([-1.0, 2.0, 0.0, -2.0, 1.0]) / (2 * h ** 3)
    dx1, dx2, dx3 = w1 @ xb, w2 @ xb, w3 @ xb
    du1, du2, du3 = w1 @ ub, w2 @ ub, w3 @ ub
    F = du1 / dx1
    G = (du2 - F * dx2) / dx1 ** 2
    H = (du3 - F * dx3 - 3.0 * G * dx1 * dx2) / dx1 ** 3
    return xb[2], ub[2], F, G, H


def test_lift_matches_curve_images():
    """F, G, H vs finite differences of actual mapped curves."""
    rng = np.random.default_rng(5)
    phis = [
        _pt("x + u^2/8", "u - x^2/10"),
        _pt("1.2*x + 0.3*u + 0.1", "-0.4*x + 0.9*u"),
        _pt("x + sin(u)/5", "u + x^2/12"),
    ]
    for phi in phis:
        pro = prolong(phi)
        for _ in range(12):
            c = rng.uniform(-0.4, 0.4, 4)

            def f(x, c=c):
                return c[0] + c[1] * x + c[2] * x * x + c[3] * x ** 3

            x0 = float(rng.uniform(-0.3, 0.3))
            jet = JetPoint(x0, f(x0), c[1] + 2 * c[2] * x0 + 3 * c[3] * x0 ** 2,
                           2 * c[2] + 6 * c[3] * x0, 6 * c[3])
            got = pro.map_jet(jet)
            want = _image_jet_fd(phi, f, x0)
            assert got.x == pytest.approx(want[0], abs=1e-12)
            assert got.u == pytest.approx(want[1], abs=1e-12)
            assert got.p == pytest.approx(want[2], abs=1e-9)
            assert got.q == pytest.approx(want[3], abs=1e-8)
            assert got.r == pytest.approx(want[4], abs=1e-5)


def test_identity_lift_is_identity():
    pro = prolong(_pt("x", "u"))
    jet = JetPoint(0.3, -0.2, 0.7, 1.1, -0.4)
    out = pro.map_jet(jet)
    for name, v in jet.values().items():
        assert getattr(out, name) == pytest.approx(v, abs=1e-14)


def test_linear_chart_lift_closed_form():
    """For x̄ = a x + b u, ū = c x + d u the lifted slope is the Möbius
    image (c + d p)/(a + b p) and q̄ = (ad − bc) q/(a + b p)³."""
    a, b, c, d = 1.3, -0.4, 0.5, 0.8
    pro = prolong(_pt(f"{a}*x + {b}*u", f"{c}*x + {d}*u"))
    rng = np.random.default_rng(0)
    for _ in range(25):
        jet = JetPoint(*rng.uniform(-1.0, 1.0, 2), *rng.uniform(-0.8, 0.8, 3))
        out = pro.map_jet(jet)
        W = a + b * jet.p
        assert out.p == pytest.approx((c + d * jet.p) / W, rel=1e-12)
        J = a * d - b * c
        assert out.q == pytest.approx(J * jet.q / W ** 3, rel=1e-11)
        want_r = (J * jet.r * W - 3.0 * J * jet.q ** 2 * b) / W ** 5
        assert out.r == pytest.approx(want_r, rel=2e-11, abs=1e-12)


def test_invert_jet_round_trip():
    phi = _pt("x + u^2/8", "u - x^2/10",
              inverse=None)
    pro = prolong(phi)
    rng = np.random.default_rng(9)
    for _ in range(20):
        jet = JetPoint(*rng.uniform(-0.4, 0.4, 2), *rng.uniform(-0.8, 0.8, 3))
        back = pro.invert_jet(pro.map_jet(jet), seed=(jet.x, jet.u))
        for name, v in jet.values().items():
            assert getattr(back, name) == pytest.approx(v, abs=1e-9)


def test_compose_matches_sequential_lift():
    inner = _pt("x + u^2/9", "u + x^2/7")
    outer = _pt("1.1*x - 0.2*u", "0.3*x + 0.9*u")
    pro_in, pro_out = prolong(inner), prolong(outer)
    pro_both = prolong(compose(outer, inner))
    rng = np.random.default_rng(2)
    for _ in range(30):
        jet = JetPoint(*rng.uniform(-0.4, 0.4, 2), *rng.uniform(-0.8, 0.8, 3))
        two = pro_out.map_jet(pro_in.map_jet(jet)).values()
        one = pro_both.map_jet(jet).values()
        for name in two:
            assert two[name] == pytest.approx(one[name], abs=1e-10,
                                              rel=1e-10)


def test_contact_residual_vanishes():
    for phi in (_pt("x + u^2/8", "u - x^2/10"),
                _pt("2*x + u", "x - u"),
                _pt("x + sin(u)/6", "u + cos(x)/5")):
        res_dx, res_du = contact_residual(prolong(phi))
        tape = compile_tape(res_dx, ("x", "u", "p"))
        rng = np.random.default_rng(4)
        for _ in range(25):
            vec = rng.uniform(-0.8, 0.8, 3)
            assert abs(tape.eval_vector(vec)) <= 1e-12
        assert evaluate(res_du, {"x": 0.1, "u": 0.2, "p": 0.3}) == 0.0


def test_degenerate_transformation_rejected():
    # collapses the plane onto a line: Jacobian identically singular
    with pytest.raises(ProlongationError):
        prolong(_pt("x + u", "2*x + 2*u"))


def test_jacobian_det_expression():
    phi = _pt("x + u^2/8", "u - x^2/10")
    det = phi.jacobian_det()
    # 1*1 - (u/4)*(-x/5) = 1 + x*u/20
    x, u = 0.4, -0.8
    assert evaluate(det, {"x": x, "u": u}) == pytest.approx(
        1.0 + x * u / 20.0, rel=1e-12)
