"""Command-line front end: outputs, CSV contracts, exit codes."""

import math
import textwrap

import pytest

from freebound import exprs_equal_numeric, parse_expression
from freebound.cli import main

TWO_PI = "6.283185307179586"

BEAM_CIRCLE = f"""\
    [lagrangian]
    order = 2
    density = kappa*q^2/2 - rho(x)*u

    [parameters]
    kappa = 1.0

    [functions]
    rho = 1

    [domain]
    kind = curve
    X = cos(t)
    U = sin(t)
    period = {TWO_PI}

    [solver]
    seed = 3
    nseeds = 6
    chart = affine
    anchor = 0.9
    max_points = 150
"""

LEN_CIRCLE = f"""\
    [lagrangian]
    order = 1
    density = sqrt(1 + p^2)

    [domain]
    kind = curve
    X = cos(t)
    U = sin(t)
    period = {TWO_PI}

    [solver]
    seed = 0
    nseeds = 4
"""

LEN_STRIP = """\
    [lagrangian]
    order = 1
    density = sqrt(1 + p^2)

    [domain]
    kind = interval
    a = 0.0
    b = 2.0

    [solver]
    seeds = 0.5, 0.3; -1.0, 0.0
"""

BEAM_STRIP_FLAT = """\
    [lagrangian]
    order = 2
    density = kappa*q^2/2 - rho(x)*u

    [parameters]
    kappa = 1.0

    [functions]
    rho = 0

    [domain]
    kind = interval
    a = 0.0
    b = 1.0

    [solver]
    seeds = 0.3, 0.5; 1.0, -2.0
"""

BEAM_STRIP_LOADED = BEAM_STRIP_FLAT.replace("rho = 0", "rho = 5/2").replace(
    "seeds = 0.3, 0.5; 1.0, -2.0", "seeds = 0.0, 0.0")

PROLONG = """\
    [lagrangian]
    order = 1
    density = sqrt(1 + p^2)

    [domain]
    kind = interval
    a = 0.0
    b = 1.0

    [transformation]
    xbar = x + u^2/10
    ubar = u - x^2/20
"""


def conf(tmp_path, text, name="prob.ini"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return str(p)


def read_csv(path):
    lines = path.read_text().splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    data = [ln for ln in lines if not ln.startswith("#")]
    return header, data


def test_el_beam_byte_exact(tmp_path, capsys):
    assert main(["el", "--config", conf(tmp_path, BEAM_CIRCLE)]) == 0
    assert capsys.readouterr().out == "kappa*s - rho(x)\n"


def test_el_length(tmp_path, capsys):
    assert main(["el", "--config", conf(tmp_path, LEN_STRIP)]) == 0
    printed = capsys.readouterr().out.strip()
    got = parse_expression(printed)
    want = parse_expression("-q/(1 + p^2)^(3/2)")
    assert exprs_equal_numeric(got, want)


def test_nbc_flat_pair(tmp_path, capsys):
    assert main(["nbc", "--config", conf(tmp_path, BEAM_CIRCLE)]) == 0
    assert capsys.readouterr().out == "kappa*q\n-(kappa*r)\n"


def test_nbc_affine_self_test(tmp_path, capsys):
    assert main(["nbc", "--config", conf(tmp_path, BEAM_CIRCLE),
                 "--chart", "affine"]) == 0
    out = capsys.readouterr().out
    assert "linear-chart self-test: PASS" in out
    assert "reference pair" in out


def test_nbc_tubular_chart_pair(tmp_path, capsys):
    assert main(["nbc", "--config", conf(tmp_path, LEN_CIRCLE),
                 "--chart", "tubular"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "chart: tubular at t0 = 0"
    assert len(out) == 3
    # order-1 pair: first condition is identically zero
    assert exprs_equal_numeric(parse_expression(out[1]),
                               parse_expression("0"))


def test_prolong(tmp_path, capsys):
    assert main(["prolong", "--config", conf(tmp_path, PROLONG)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("F = ")
    assert "\nG = " in out and "\nH = " in out
    assert "contact self-test: PASS" in out


def test_solve_beam_circle(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["solve", "--config", conf(tmp_path, BEAM_CIRCLE),
                 "--out", str(out)])
    assert code == 0
    header, data = read_csv(out / "solutions.csv")
    assert header[0] == "# freebound beam-solutions v1"
    assert header[1].startswith("# columns: t_a,t_b,c0,")
    assert len(data) >= 1 and data[0] != "no-solutions-found"
    row = [float(v) for v in data[0].split(",")]
    assert len(row) == 13
    assert max(abs(v) for v in row[6:12]) <= 1e-8    # the six residuals
    # one polyline per solution, 200 samples each
    poly = out / "solution_000.csv"
    pheader, pdata = read_csv(poly)
    assert pheader[0] == "# freebound curve-samples v1"
    assert len(pdata) == 200
    # every sampled point lies inside the closed unit disk
    for ln in pdata:
        x, u = (float(v) for v in ln.split(","))
        assert math.hypot(x, u) <= 1.0 + 1e-9


def test_solve_length_circle_with_family(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["solve", "--config", conf(tmp_path, LEN_CIRCLE),
                 "--out", str(out)]) == 0
    header, data = read_csv(out / "solutions.csv")
    assert header[0] == "# freebound chord-solutions v1"
    for ln in data:
        row = [float(v) for v in ln.split(",")]
        assert row[6] == pytest.approx(2.0, abs=1e-8)     # diameter length
        assert int(row[9]) == 1                           # family nullity
    fheader, fdata = read_csv(out / "family.csv")
    assert fheader[0] == "# freebound chord-family v1"
    assert any("termination: closed" in h for h in fheader)
    assert len(fdata) > 50
    assert "family trace" in capsys.readouterr().out


def test_solve_length_strip(tmp_path):
    out = tmp_path / "run"
    assert main(["solve", "--config", conf(tmp_path, LEN_STRIP),
                 "--out", str(out)]) == 0
    header, data = read_csv(out / "solutions.csv")
    assert header[0] == "# freebound chord-solutions v1"
    assert len(data) == 2           # two distinct heights
    for ln in data:
        row = [float(v) for v in ln.split(",")]
        assert row[1] == pytest.approx(row[0])      # horizontal: u_a == u_b
        assert row[6] == pytest.approx(2.0)         # strip width


def test_solve_flat_strip(tmp_path):
    out = tmp_path / "run"
    assert main(["solve", "--config", conf(tmp_path, BEAM_STRIP_FLAT),
                 "--out", str(out)]) == 0
    _, data = read_csv(out / "solutions.csv")
    assert len(data) == 2
    for ln in data:
        row = [float(v) for v in ln.split(",")]
        assert row[4] == 0.0 and row[5] == 0.0     # c2 = c3 = 0
        assert int(row[12]) == 2
    assert (out / "solution_001.csv").exists()


def test_solve_certified_empty(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["solve", "--config", conf(tmp_path, BEAM_STRIP_LOADED),
                 "--out", str(out)]) == 0
    header, data = read_csv(out / "solutions.csv")
    assert data == ["no-solutions-found"]
    assert any("certified empty" in h for h in header)
    assert any("integrated load" in h for h in header)
    assert "linearly incompatible" in capsys.readouterr().out


def test_solve_determinism(tmp_path):
    cfgp = conf(tmp_path, LEN_CIRCLE)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["solve", "--config", cfgp, "--out", str(out1)]) == 0
    assert main(["solve", "--config", cfgp, "--out", str(out2)]) == 0
    files1 = sorted(p.name for p in out1.iterdir())
    assert files1 == sorted(p.name for p in out2.iterdir())
    for name in files1:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_seed_override_changes_generated_seeds(tmp_path):
    cfgp = conf(tmp_path, LEN_CIRCLE)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["solve", "--config", cfgp, "--out", str(out1)]) == 0
    assert main(["solve", "--config", cfgp, "--out", str(out2),
                 "--seed", "99"]) == 0
    b1 = (out1 / "solutions.csv").read_bytes()
    b2 = (out2 / "solutions.csv").read_bytes()
    assert b1 != b2     # different diameters from different seeds


def test_local_family(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["local-family", "--config", conf(tmp_path, BEAM_CIRCLE),
                 "--out", str(out)]) == 0
    header, data = read_csv(out / "family.csv")
    assert header[0] == "# freebound beam-local-family v1"
    assert any("anchor t0 = 0.9" in h for h in header)
    assert len(data) > 10
    for ln in data[:5]:
        assert ln.split(",")[4] == "1"      # regular family points
    assert "family through t0 = 0.9" in capsys.readouterr().out


def test_exit_1_missing_config(tmp_path, capsys):
    assert main(["el", "--config", str(tmp_path / "nope.ini")]) == 1
    assert "cannot read config file" in capsys.readouterr().err


def test_exit_1_undeclared_parameter(tmp_path, capsys):
    text = BEAM_CIRCLE.replace("    [parameters]\n    kappa = 1.0\n\n", "")
    assert main(["el", "--config", conf(tmp_path, text)]) == 1
    assert "unknown identifier 'kappa'" in capsys.readouterr().err


def test_exit_1_wrong_density_for_solver(tmp_path, capsys):
    text = BEAM_CIRCLE.replace("kappa*q^2/2 - rho(x)*u",
                               "kappa*q^2/2 + rho(x)*u^2")
    assert main(["solve", "--config", conf(tmp_path, text)]) == 1
    assert "the configured density differs" in capsys.readouterr().err


def test_exit_1_chart_needs_curve(tmp_path, capsys):
    assert main(["nbc", "--config", conf(tmp_path, LEN_STRIP),
                 "--chart", "tubular"]) == 1
    assert "curve domain" in capsys.readouterr().err


def test_exit_2_internal_error(tmp_path, capsys, monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("numerics exploded")
    monkeypatch.setattr("freebound.cli.solve_free_sliding_beam", boom)
    assert main(["solve", "--config", conf(tmp_path, BEAM_STRIP_FLAT),
                 "--out", str(tmp_path / "o")]) == 2
    assert "internal error: RuntimeError: numerics exploded" in \
        capsys.readouterr().err


def test_verify_exit_codes(capsys, monkeypatch):
    monkeypatch.setattr("freebound.cli.run_all_suites",
                        lambda seed: [("decomposition", True, "ok"),
                                      ("prolongation", True, "ok")])
    assert main(["verify"]) == 0
    assert "decomposition: PASS — ok" in capsys.readouterr().out
    monkeypatch.setattr("freebound.cli.run_all_suites",
                        lambda seed: [("decomposition", False, "off by 1")])
    assert main(["verify"]) == 2
    assert "decomposition: FAIL — off by 1" in capsys.readouterr().out
