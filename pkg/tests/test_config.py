"""Config file loading and validation."""

import math
import textwrap

import pytest

from freebound import (ConfigError, ParseError, evaluate, load_config,
                       euler_lagrange, print_expression)


def write(tmp_path, text, name="prob.ini"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return str(p)


FULL = """\
    [lagrangian]
    order = 2
    density = kappa*q^2/2 - rho(x)*u

    [parameters]
    kappa = 2.5

    [functions]
    rho = sin(3*x)

    [domain]
    kind = curve
    X = cos(t)
    U = sin(t)
    period = 6.283185307179586
    orientation = -1

    [solver]
    tol = 1e-9
    seed = 7
    nseeds = 4
    chart = affine
    seeds = 0.3, 2.84; 1.0, 2.6
    anchor = 0.785398
    grid = -1, 0, 1
    step = 0.02
    max_points = 500

    [output]
    out = results
"""


def test_load_full_roundtrip(tmp_path):
    cfg = load_config(write(tmp_path, FULL))
    assert cfg.order == 2
    assert cfg.parameters == {"kappa": 2.5}
    assert cfg.functions == {"rho": "sin(3*x)"}
    assert cfg.domain_kind == "curve" and cfg.interval is None
    assert cfg.curve_spec["period"] == pytest.approx(2 * math.pi)
    assert cfg.curve_spec["orientation"] == -1
    assert (cfg.tol, cfg.seed, cfg.nseeds) == (1e-9, 7, 4)
    assert cfg.chart == "affine"
    assert cfg.seeds == [(0.3, 2.84), (1.0, 2.6)]
    assert cfg.anchor == pytest.approx(0.785398)
    assert cfg.grid == [-1.0, 0.0, 1.0]
    assert (cfg.step, cfg.max_points) == (0.02, 500)
    assert cfg.out_dir == "results"


def test_defaults(tmp_path):
    cfg = load_config(write(tmp_path, """\
        [lagrangian]
        order = 1
        density = sqrt(1 + p^2)

        [domain]
        kind = interval
        a = 0.0
        b = 1.0
    """))
    assert cfg.interval == (0.0, 1.0) and cfg.curve_spec is None
    assert cfg.tol == 1e-10 and cfg.seed == 0 and cfg.nseeds == 8
    assert cfg.chart == "tubular" and cfg.step == 0.05
    assert cfg.max_points == 2000
    assert cfg.seeds is None and cfg.anchor is None and cfg.grid is None
    assert cfg.out_dir == "out"
    assert cfg.transformation is None


def test_build_lagrangian_and_curve(tmp_path):
    cfg = load_config(write(tmp_path, FULL))
    lag = cfg.build_lagrangian()
    expr = euler_lagrange(lag)
    # EL of the loaded density: kappa*s - rho(x)
    val = evaluate(expr, {"x": 0.2, "u": 0.0, "p": 0.0, "q": 0.0,
                          "r": 0.0, "s": 1.0, "kappa": 2.5},
                   functions=cfg.function_values())
    assert val == pytest.approx(2.5 - math.sin(0.6), rel=1e-12)
    gamma = cfg.build_curve()
    assert gamma.orientation == -1
    x, u = gamma.point(0.0)
    assert (x, u) == pytest.approx((1.0, 0.0))


def test_transformation_section(tmp_path):
    cfg = load_config(write(tmp_path, """\
        [lagrangian]
        order = 1
        density = sqrt(1 + p^2)

        [domain]
        kind = interval
        a = 0
        b = 1

        [transformation]
        xbar = x + u^2/10
        ubar = u - x^2/20
    """))
    assert cfg.transformation == {"xbar": "x + u^2/10",
                                  "ubar": "u - x^2/20"}


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read config file"):
        load_config("/nonexistent/prob.ini")


@pytest.mark.parametrize("mutation, message", [
    ("[extra]\nfoo = 1\n", "unknown config section"),
    ("", "missing"),                              # no sections at all
])
def test_section_errors(tmp_path, mutation, message):
    base = "" if mutation == "" else FULL
    with pytest.raises(ConfigError, match=message):
        load_config(write(tmp_path, base + mutation))


def test_domain_errors(tmp_path):
    head = "[lagrangian]\norder = 1\ndensity = sqrt(1 + p^2)\n\n[domain]\n"
    cases = [
        ("kind = interval\na = 1\nb = 1\n", "a < b"),
        ("kind = interval\na = 0\nb = 1\nperiod = 2\n", "curve option"),
        ("kind = curve\nX = cos(t)\nU = sin(t)\nperiod = -3\n", "positive"),
        ("kind = curve\nX = cos(t)\nU = sin(t)\nperiod = 6\na = 0\n",
         "interval option"),
        ("kind = curve\nU = sin(t)\nperiod = 6\n", "missing domain.X"),
        ("kind = disk\n", "interval.*or.*curve"),
        ("kind = curve\nX = cos(t)\nU = sin(t)\nperiod = 6\n"
         "orientation = 2\n", "orientation"),
    ]
    for body, message in cases:
        with pytest.raises(ConfigError, match=message):
            load_config(write(tmp_path, head + body))


def test_solver_errors(tmp_path):
    head = ("[lagrangian]\norder = 1\ndensity = sqrt(1 + p^2)\n\n"
            "[domain]\nkind = interval\na = 0\nb = 1\n\n[solver]\n")
    cases = [
        ("tol = 2\n", "tol out of range"),
        ("nseeds = 0\n", "nseeds"),
        ("chart = polar\n", "affine or tubular"),
        ("step = -1\n", "step out of range"),
        ("seeds = 0.3, oops\n", "bad seed tuple"),
        ("grid = 1, two\n", "comma-separated"),
    ]
    for body, message in cases:
        with pytest.raises(ConfigError, match=message):
            load_config(write(tmp_path, head + body))


def test_lagrangian_errors(tmp_path):
    with pytest.raises(ConfigError, match="order must be 1 or 2"):
        load_config(write(tmp_path, """\
            [lagrangian]
            order = 3
            density = p^2

            [domain]
            kind = interval
            a = 0
            b = 1
        """))
    with pytest.raises(ConfigError, match="parameter kappa is not a number"):
        load_config(write(tmp_path, """\
            [lagrangian]
            order = 2
            density = kappa*q^2/2

            [parameters]
            kappa = soft

            [domain]
            kind = interval
            a = 0
            b = 1
        """))
    with pytest.raises(ConfigError, match="function rho"):
        load_config(write(tmp_path, """\
            [lagrangian]
            order = 2
            density = q^2/2 - rho(x)*u

            [functions]
            rho = sin(

            [domain]
            kind = interval
            a = 0
            b = 1
        """))
    with pytest.raises(ConfigError, match="missing transformation.ubar"):
        load_config(write(tmp_path, """\
            [lagrangian]
            order = 1
            density = p

            [domain]
            kind = interval
            a = 0
            b = 1

            [transformation]
            xbar = x + u
        """))


def test_undeclared_names_surface_at_build(tmp_path):
    """Density referring to an undeclared parameter parses only at build
    time, where it raises the library ParseError (the CLI maps it to a
    configuration failure)."""
    cfg = load_config(write(tmp_path, """\
        [lagrangian]
        order = 2
        density = kappa*q^2/2 - rho(x)*u

        [domain]
        kind = interval
        a = 0
        b = 1
    """))
    with pytest.raises(ParseError, match="unknown identifier 'kappa'"):
        cfg.build_lagrangian()


def test_build_curve_requires_curve_domain(tmp_path):
    cfg = load_config(write(tmp_path, """\
        [lagrangian]
        order = 1
        density = sqrt(1 + p^2)

        [domain]
        kind = interval
        a = 0
        b = 1
    """))
    with pytest.raises(ConfigError, match="curve domain"):
        cfg.build_curve()


def test_function_helpers(tmp_path):
    cfg = load_config(write(tmp_path, FULL))
    fv = cfg.function_values()
    assert fv["rho"](0, 0.5) == pytest.approx(math.sin(1.5))
    assert fv["rho"](1, 0.5) == pytest.approx(3 * math.cos(1.5))
    fe = cfg.function_exprs()
    assert print_expression(fe["rho"]) == "sin(3*x)"
