"""Beam loads, reduced coordinates, endpoint conditions, the sliding solver."""

import math

import numpy as np
import pytest

from freebound import (BeamCoefficients, BeamError, BeamProblem,
                       BoundaryCurve, NonCrossingError, beam_value,
                       endpoint_nbc_residual, local_solution_family,
                       parse_expression, particular_solution,
                       reduced_coefficients, solve_free_sliding_beam)


def circle(radius=1.0):
    return BoundaryCurve(parse_expression(f"{radius}*cos(t)",
                                          parameters=("t",)),
                         parse_expression(f"{radius}*sin(t)",
                                          parameters=("t",)),
                         2.0 * math.pi)


def test_problem_validation():
    rho = parse_expression("0")
    with pytest.raises(BeamError):
        BeamProblem(0.0, rho, (0.0, 1.0))
    with pytest.raises(BeamError):
        BeamProblem(1.0, parse_expression("x + u"), (0.0, 1.0))
    with pytest.raises(BeamError):
        BeamProblem(1.0, parse_expression("rho(x)", functions=("rho",)),
                    (0.0, 1.0))
    with pytest.raises(BeamError):
        BeamProblem(1.0, rho, (1.0, 1.0))


def test_particular_zero_load():
    prob = BeamProblem(2.0, parse_expression("0"), (0.0, 1.0))
    u0 = prob.particular(0.0)
    for k in range(5):
        assert u0.eval(0.7, k) == 0.0


def test_particular_constant_load():
    """kappa u'''' = rho0  =>  u0 = rho0 x^4 / (24 kappa) in the zero gauge."""
    kappa, rho0 = 2.0, 3.0
    prob = BeamProblem(kappa, parse_expression("3"), (0.0, 1.0))
    u0 = prob.particular(0.0)
    for x in (0.3, 1.0, -0.8):
        assert u0.eval(x, 0) == pytest.approx(rho0 * x ** 4 / 24 / kappa,
                                              rel=1e-10)
        assert u0.eval(x, 1) == pytest.approx(rho0 * x ** 3 / 6 / kappa,
                                              rel=1e-10)
        assert u0.eval(x, 2) == pytest.approx(rho0 * x ** 2 / 2 / kappa,
                                              rel=1e-10)
        assert u0.eval(x, 3) == pytest.approx(rho0 * x / kappa, rel=1e-10)
        assert u0.eval(x, 4) == pytest.approx(rho0 / kappa, rel=1e-10)


def test_particular_sine_load():
    # u'''' = sin x with four vanishing derivatives at 0: sin x - x + x^3/6
    prob = BeamProblem(1.0, parse_expression("sin(x)"), (0.0, 2.0))
    u0 = particular_solution(prob, 0.0)
    for x in (0.4, 1.3, 2.0):
        assert u0.eval(x, 0) == pytest.approx(math.sin(x) - x + x ** 3 / 6,
                                              abs=1e-10)
        assert u0.eval(x, 2) == pytest.approx(-math.sin(x) + x, abs=1e-10)
        assert u0.eval(x, 4) == pytest.approx(math.sin(x), abs=1e-12)
    with pytest.raises(BeamError):
        u0.eval(1.0, 5)


def test_reduced_coefficients():
    prob = BeamProblem(1.0, parse_expression("0"), (0.0, 1.0))
    u0 = prob.particular()
    c2, c0 = reduced_coefficients(1.0, 0.0, 0.0, 1.0, u0)
    assert (c2, c0) == pytest.approx((-3.0, 2.0))
    cf = BeamCoefficients(c0, 0.0, c2, 1.0)
    # passes through (1, 0) with vanishing second derivative there
    assert beam_value(cf, u0, 1.0, 0) == pytest.approx(0.0, abs=1e-14)
    assert beam_value(cf, u0, 1.0, 2) == pytest.approx(0.0, abs=1e-14)


def test_beam_value_is_cubic_plus_particular():
    prob = BeamProblem(1.0, parse_expression("sin(x)"), (0.0, 2.0))
    u0 = prob.particular()
    cf = BeamCoefficients(0.5, -1.0, 2.0, 0.25)
    x = 1.1
    want = (0.25 * x ** 3 + 2.0 * x ** 2 - x + 0.5) + u0.eval(x, 0)
    assert beam_value(cf, u0, x, 0) == pytest.approx(want, rel=1e-12)
    assert beam_value(cf, u0, x, 3) == pytest.approx(6 * 0.25 + u0.eval(x, 3),
                                                     rel=1e-12)


def test_chord_satisfies_endpoint_conditions():
    """With no load, straight chords have q = r = 0, so both boundary
    conditions vanish in every chart (they are invertible combinations
    of the flat pair)."""
    gamma = circle()
    prob = BeamProblem(1.5, parse_expression("0"), gamma)
    u0 = prob.particular()
    ta, tb = 0.7, 2.4
    (xa, ua), (xb, ub) = gamma.point(ta), gamma.point(tb)
    c1 = (ub - ua) / (xb - xa)
    cf = BeamCoefficients(ua - c1 * xa, c1, 0.0, 0.0)
    for kind in ("affine", "tubular"):
        for t in (ta, tb):
            r1, r2 = endpoint_nbc_residual(prob, gamma, t, cf, kind, u0)
            assert abs(r1) <= 1e-10 and abs(r2) <= 1e-10, (kind, t, r1, r2)


def test_first_condition_tracks_second_derivative():
    """In the affine chart the first condition vanishes exactly when
    u'' = 0 at the endpoint."""
    gamma = circle()
    prob = BeamProblem(1.0, parse_expression("0"), gamma)
    u0 = prob.particular()
    t = 0.9
    xe = gamma.point(t)[0]
    bent = BeamCoefficients(0.1, 0.2, 0.7, 0.0)        # u'' = 1.4 everywhere
    r1, _ = endpoint_nbc_residual(prob, gamma, t, bent, "affine", u0)
    assert abs(r1) > 1e-4
    # choose c2 so that u''(xe) = 0
    straightened = BeamCoefficients(0.1, 0.2, -3.0 * 0.3 * xe, 0.3)
    r1b, _ = endpoint_nbc_residual(prob, gamma, t, straightened, "affine", u0)
    assert abs(r1b) <= 1e-10


def test_tubular_patch_rejects_distant_endpoint():
    gamma = circle()
    prob = BeamProblem(1.0, parse_expression("0"), gamma)
    far = BeamCoefficients(5.0, 0.0, 0.0, 0.0)
    with pytest.raises(NonCrossingError):
        endpoint_nbc_residual(prob, gamma, 0.0, far, "tubular")


def test_flat_strip_no_load():
    prob = BeamProblem(1.0, parse_expression("0"), (0.0, 1.0))
    report = solve_free_sliding_beam(prob, None,
                                     [(0.3, 0.5), (1.0, -2.0), (0.3, 0.5)])
    assert not report.empty_certified
    assert len(report.solutions) == 2          # duplicate seed collapsed
    for sol in report.solutions:
        assert sol.coeffs.c2 == 0.0 and sol.coeffs.c3 == 0.0
        assert sol.nullity == 2
        assert sol.max_residual() <= 1e-12


def test_flat_strip_constant_load_certified_empty():
    prob = BeamProblem(1.0, parse_expression("5/2"), (0.0, 1.0))
    report = solve_free_sliding_beam(prob, None, [(0.0, 0.0)])
    assert report.empty_certified
    assert report.solutions == []
    assert "integrated load" in report.certificate
    assert "first load moment" in report.certificate
    # integrated load over [0,1] is exactly rho0
    assert "2.5" in report.certificate
    print("certificate:", report.certificate)


def test_flat_strip_balanced_load_has_solutions():
    """cos(2 pi x) on [0,1] has zero integral and zero first moment, so
    the wall conditions are compatible and the affine family survives."""
    two_pi = 2.0 * math.pi
    prob = BeamProblem(1.0, parse_expression(f"cos({two_pi!r}*x)"),
                       (0.0, 1.0))
    report = solve_free_sliding_beam(prob, None, [(0.0, 0.0)])
    assert not report.empty_certified
    assert len(report.solutions) == 1
    sol = report.solutions[0]
    assert sol.max_residual() <= 1e-9
    assert sol.nullity == 2


def test_solve_on_circle_no_load_gives_chords():
    gamma = circle()
    prob = BeamProblem(1.0, parse_expression("0"), gamma)
    report = solve_free_sliding_beam(prob, gamma, [(0.5, 2.0)], tol=1e-12)
    assert report.solutions, report.messages
    sol = report.solutions[0]
    # unloaded solutions are straight chords with a two-parameter slack
    assert abs(sol.coeffs.c2) <= 1e-8 and abs(sol.coeffs.c3) <= 1e-8
    assert sol.nullity == 2
    assert sol.max_residual() <= 1e-10
    xa = gamma.point(sol.t_a)[0]
    xb = gamma.point(sol.t_b)[0]
    assert xa < xb


def test_solve_on_circle_with_load():
    gamma = circle()
    prob = BeamProblem(1.0, parse_expression("1"), gamma)
    rng = np.random.default_rng(3)
    T = 2 * math.pi
    seeds = []
    for _ in range(6):
        ta = rng.uniform(0.0, T)
        seeds.append((ta, ta + T * rng.uniform(0.25, 0.75)))
    report = solve_free_sliding_beam(prob, gamma, seeds, tol=1e-11,
                                     chart_kind="affine")
    assert report.solutions, report.messages
    for sol in report.solutions:
        assert sol.max_residual() <= 1e-9
        assert 0 <= sol.t_a < T and 0 <= sol.t_b < T
        # a nonzero load pins the beam: the solution is isolated
        assert sol.nullity == 0
    print(f"circle solve: {len(report.solutions)} solution(s), "
          f"worst residual {max(s.max_residual() for s in report.solutions):.2e}")


def test_local_family_is_regular():
    gamma = circle()
    prob = BeamProblem(1.0, parse_expression("1"), gamma)
    fam = local_solution_family(prob, gamma, 0.9, np.linspace(-2, 2, 9),
                                max_points=120)
    assert len(fam.points) > 10, fam.message
    assert fam.nullities is not None and np.all(fam.nullities == 1)
    # spot-check the full residuals of a few family members
    u0 = prob.particular()
    xp, up = gamma.point(0.9)
    for i in (0, len(fam.points) // 2, len(fam.points) - 1):
        cf = fam.coefficients(i, prob, gamma)
        inc = beam_value(cf, u0, xp, 0) - up
        r1, r2 = endpoint_nbc_residual(prob, gamma, 0.9, cf, "affine", u0)
        assert max(abs(inc), abs(r1), abs(r2)) <= 1e-8
    print(f"local family: {len(fam.points)} points, {fam.termination}")
