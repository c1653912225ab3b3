"""Self-contained verification suites.

Three independent end-to-end checks, each returning (ok, detail):

* ``suite_decomposition`` — the finite-difference first variation of
  the action equals ∫E·v plus the boundary bracket for random curves
  and variations, for both the beam and arclength densities, and the
  mismatch shrinks under grid refinement.
* ``suite_prolongation`` — jet lifts of random planar transformations
  compose functorially and annihilate the contact forms.
* ``suite_invariance`` — flat-strip beam solutions, pushed through
  random affine diffeomorphisms of the plane, solve the transformed
  sliding problem: the pulled-back Euler-Lagrange expression vanishes
  along the mapped curves and the chart natural boundary conditions
  vanish at the mapped endpoints on the mapped walls.
"""

from __future__ import annotations

import math

import numpy as np

from ._tape import compile_tape
from .exprs import (Const, ExprFunction, JetPoint, add, const, mul,
                    parse_expression, var)
from .geometry import BoundaryCurve, SampledCurve, affine_chart
from .oracle import DiscreteActionConfig, check_variation_decomposition
from .prolongation import PointTransformation, compose, contact_residual, \
    prolong
from .variational import euler_lagrange, nbc_in_chart, pullback_lagrangian
from .beam import beam_lagrangian
from .geodesics import length_lagrangian

__all__ = ["suite_decomposition", "suite_prolongation", "suite_invariance",
           "run_all_suites"]


def _random_curve(rng: np.random.Generator, a: float, b: float,
                  n: int) -> SampledCurve:
    c = rng.uniform(-1.0, 1.0, 5)
    return SampledCurve.from_function(
        lambda x: c[0] + c[1] * x + c[2] * math.sin(2.0 * x)
        + c[3] * math.cos(3.0 * x) + c[4] * x * x, a, b, n)


def suite_decomposition(seed: int = 0, pairs: int = 20, n: int = 2000,
                        tol: float = 1e-4) -> tuple:
    """Decomposition identity for the beam and arclength densities."""
    rng = np.random.default_rng(seed)
    beam = beam_lagrangian()
    length = length_lagrangian()
    rho1 = ExprFunction(parse_expression("1"))
    cfg = DiscreteActionConfig(n=n, eps=1e-6)
    worst = 0.0
    for _ in range(pairs):
        u = _random_curve(rng, 0.0, 1.0, n)
        v = _random_curve(rng, 0.0, 1.0, n)
        rep = check_variation_decomposition(
            beam, u, v, cfg, values={"kappa": 1.0}, functions={"rho": rho1})
        worst = max(worst, rep.rel_error)
        rep = check_variation_decomposition(length, u, v, cfg)
        worst = max(worst, rep.rel_error)
    # refinement ratio, measured where truncation (not the ε-difference
    # roundoff floor) dominates
    errs = []
    for m in (128, 256):
        u = _random_curve(np.random.default_rng(seed + 101), 0.0, 1.0, m)
        v = _random_curve(np.random.default_rng(seed + 202), 0.0, 1.0, m)
        errs.append(check_variation_decomposition(
            beam, u, v, DiscreteActionConfig(n=m, eps=1e-6),
            values={"kappa": 1.0}, functions={"rho": rho1}).error)
    ratio = errs[0] / max(errs[1], 1e-300)
    ok = worst <= tol and ratio >= 3.5
    return ok, (f"worst relative error {worst:.3e} over {pairs} pairs "
                f"(tol {tol:g}); refinement ratio {ratio:.1f} (need 3.5)")


def _random_transformation(rng: np.random.Generator,
                           tag: int) -> PointTransformation:
    """A random planar transformation valid on the unit box: linear on
    even tags, a bounded nonlinear shear on odd tags."""
    x, u = var("x"), var("u")
    if tag % 2 == 0:
        while True:
            a, b, c, d = rng.uniform(-1.5, 1.5, 4)
            if abs(a * d - b * c) >= 0.3:
                break
        e, f = rng.uniform(-0.5, 0.5, 2)
        xbar = add(add(mul(const(a), x), mul(const(b), u)), const(e))
        ubar = add(add(mul(const(c), x), mul(const(d), u)), const(f))
        return PointTransformation(xbar, ubar, name=f"lin{tag}")
    al, be, ga = rng.uniform(-0.15, 0.15, 3)
    xbar = add(x, add(mul(const(al), u), mul(const(be), mul(u, u))))
    ubar = add(u, mul(const(ga), mul(x, x)))
    return PointTransformation(xbar, ubar, name=f"shear{tag}")


def suite_prolongation(seed: int = 0, charts: int = 20, jets: int = 50,
                       tol: float = 1e-8) -> tuple:
    """Composition functoriality and contact-form annihilation.

    Jets are resampled whenever either stage of the composition leaves
    the regular region (mapped jet components above 100): there the
    mapped curve is close to vertical, the lifted slope has a genuine
    pole, and the identity — while still exact — is evaluated at
    ill-conditioned points that say nothing about correctness.
    Mismatches are measured relative to the component magnitude."""
    rng = np.random.default_rng(seed)
    worst_comp = 0.0
    worst_contact = 0.0
    cap = 100.0
    for k in range(charts):
        inner = _random_transformation(rng, 2 * k + 1)   # nonlinear, bounded
        outer = _random_transformation(rng, 2 * k)       # linear
        pro_in = prolong(inner, seed=seed + k)
        pro_out = prolong(outer, seed=seed + k)
        pro_both = prolong(compose(outer, inner), seed=seed + k)
        res_dx, _ = contact_residual(pro_in)
        contact_tape = compile_tape(res_dx, ("x", "u", "p"))
        done = attempts = 0
        while done < jets and attempts < 100 * jets:
            attempts += 1
            jet = JetPoint(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                           rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                           rng.uniform(-1.0, 1.0))
            step1 = pro_in.map_jet(jet)
            two = pro_out.map_jet(step1).values()
            if max(abs(v) for v in step1.values().values()) > cap or \
                    max(abs(v) for v in two.values()) > cap:
                continue
            done += 1
            one = pro_both.map_jet(jet).values()
            worst_comp = max(worst_comp,
                             max(abs(two[n] - one[n]) / max(1.0, abs(two[n]))
                                 for n in two))
            worst_contact = max(worst_contact, abs(contact_tape.eval_vector(
                np.array([jet.x, jet.u, jet.p]))))
        if done < jets:
            return False, (f"could not find {jets} regular jets for chart "
                           f"pair {k}")
    ok = worst_comp <= tol and worst_contact <= tol
    return ok, (f"worst composition mismatch {worst_comp:.3e}, worst "
                f"contact residual {worst_contact:.3e} over {charts} chart "
                f"pairs x {jets} jets (tol {tol:g})")


def _affine_pair(A: np.ndarray, shift: np.ndarray):
    """Forward and inverse PointTransformations of v -> A v + shift."""
    x, u = var("x"), var("u")

    def build(M, s, name, inverse=None):
        xbar = add(add(mul(const(M[0, 0]), x), mul(const(M[0, 1]), u)),
                   const(s[0]))
        ubar = add(add(mul(const(M[1, 0]), x), mul(const(M[1, 1]), u)),
                   const(s[1]))
        return PointTransformation(xbar, ubar, inverse=inverse, name=name)

    Ainv = np.linalg.inv(A)
    sinv = -Ainv @ shift
    fwd_plain = build(A, shift, "affine-fwd")
    inv = build(Ainv, sinv, "affine-inv", inverse=fwd_plain)
    fwd = build(A, shift, "affine-fwd", inverse=inv)
    return fwd, inv


def suite_invariance(seed: int = 0, maps: int = 10, tol: float = 1e-8) -> tuple:
    """Affine invariance of flat-strip beam solutions (ρ ≡ 0, κ = 1).

    For each random affine diffeomorphism: pull the beam density back
    to the new coordinates, map a handful of straight-line solutions
    and the strip walls forward, and check that the transformed
    Euler-Lagrange expression vanishes along the mapped lines and the
    transformed chart NBC pair vanishes at the mapped endpoints."""
    rng = np.random.default_rng(seed)
    beam = beam_lagrangian()
    rho0 = ExprFunction(parse_expression("0"))
    lines = [(0.0, 0.0), (0.3, 0.7), (-0.2, -0.4)]      # (c0, c1)
    worst = 0.0
    a_, b_ = 0.0, 1.0
    for _ in range(maps):
        while True:
            A = rng.uniform(-1.5, 1.5, (2, 2))
            if abs(np.linalg.det(A)) < 0.5:
                continue
            if all(abs(A[0, 0] + A[0, 1] * c1) >= 0.25 for _, c1 in lines):
                break
        shift = rng.uniform(-0.5, 0.5, 2)
        fwd, inv = _affine_pair(A, shift)
        pro_fwd = prolong(fwd, seed=seed)
        lag_new = pullback_lagrangian(beam, prolong(inv, seed=seed))
        el_new = euler_lagrange(lag_new)
        el_tape = compile_tape(el_new, ("x", "u", "p", "q", "r", "s",
                                        "kappa"), functions=("rho",))
        # mapped walls: the images of {x=a_} and {x=b_}, parametrized by
        # the old wall ordinate (offset so the curve parameter is >= 0)
        L = 5.0
        wall_curves = {}
        for wall_x in (a_, b_):
            t = var("t")
            told = add(t, const(-L))
            Xw = add(add(mul(const(A[0, 0]), const(wall_x)),
                         mul(const(A[0, 1]), told)), const(shift[0]))
            Uw = add(add(mul(const(A[1, 0]), const(wall_x)),
                         mul(const(A[1, 1]), told)), const(shift[1]))
            wall_curves[wall_x] = BoundaryCurve(Xw, Uw, 2 * L, closed=False)
        for c0, c1 in lines:
            # EL residual along the mapped line (still a line, so its
            # second and higher derivatives vanish identically)
            for x0 in np.linspace(a_, b_, 7):
                j1 = pro_fwd.map_jet(JetPoint(float(x0), c0 + c1 * float(x0),
                                              c1))
                vec = np.array([j1.x, j1.u, j1.p, 0.0, 0.0, 0.0, 1.0])
                worst = max(worst, abs(el_tape.eval_vector(vec, [rho0])))
            # chart NBC at both mapped endpoints
            for wall_x in (a_, b_):
                u_end = c0 + c1 * wall_x
                gamma = wall_curves[wall_x]
                chart = affine_chart(gamma, u_end + L)
                pair = nbc_in_chart(lag_new, chart.prolonged)
                cvars = ("x", "u", "p", "q", "r", "kappa")
                t1 = compile_tape(pair.first, cvars, functions=("rho",))
                t2 = compile_tape(pair.second, cvars, functions=("rho",))
                jet3 = pro_fwd.map_jet(JetPoint(wall_x, u_end, c1, 0.0, 0.0))
                cjet = chart.prolonged.invert_jet(jet3)
                vec = np.array([cjet.x, cjet.u, cjet.p, cjet.q, cjet.r, 1.0])
                worst = max(worst, abs(t1.eval_vector(vec, [rho0])),
                            abs(t2.eval_vector(vec, [rho0])))
    ok = worst <= tol
    return ok, (f"worst transformed EL/NBC residual {worst:.3e} over "
                f"{maps} affine maps x {len(lines)} solutions (tol {tol:g})")


def run_all_suites(seed: int = 0) -> list:
    """[(name, ok, detail)] for the three suites."""
    return [
        ("decomposition", *suite_decomposition(seed)),
        ("prolongation-composition", *suite_prolongation(seed)),
        ("invariance", *suite_invariance(seed)),
    ]
