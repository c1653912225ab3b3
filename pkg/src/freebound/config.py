"""Problem configuration files.

A problem is described by an INI-style text file:

    [lagrangian]
    order = 2
    density = kappa*q^2/2 - rho(x)*u

    [parameters]
    kappa = 1.0

    [functions]
    rho = sin(x)

    [domain]
    kind = curve
    X = cos(t)
    U = sin(t)
    period = 6.283185307179586
    ; or: kind = interval with a = 0.0, b = 1.0

    [solver]
    tol = 1e-10
    seed = 0
    nseeds = 8
    chart = tubular
    ; seeds = 0.3, 2.84; 1.0, 2.6      explicit seed tuples
    ; anchor = 0.785398                local-family anchor t0
    ; grid = -1, 0, 1                  local-family c1 seeds
    step = 0.05
    max_points = 2000

    [output]
    out = out

Section and option names are fixed; expression values use the same
grammar as the library parser.  Everything is validated eagerly so the
command line can distinguish configuration errors (exit 1) from
numeric failures (exit 2).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

from .exprs import Expr, ExprFunction, parse_expression
from .geometry import BoundaryCurve
from .variational import Lagrangian

__all__ = ["ConfigError", "ProblemConfig", "load_config"]


class ConfigError(ValueError):
    pass


_SOLVER_DEFAULTS = {
    "tol": 1e-10,
    "seed": 0,
    "nseeds": 8,
    "chart": "tubular",
    "step": 0.05,
    "max_points": 2000,
}


@dataclass
class ProblemConfig:
    order: int
    density_text: str
    parameters: dict                    # name -> float
    functions: dict                     # name -> expression text
    domain_kind: str                    # "interval" | "curve"
    interval: "tuple | None"
    curve_spec: "dict | None"           # X, U texts, period, orientation
    tol: float
    seed: int
    nseeds: int
    chart: str
    step: float
    max_points: int
    seeds: "list | None"                # explicit seed tuples
    anchor: "float | None"
    grid: "list | None"
    out_dir: str
    transformation: "dict | None" = None    # xbar, ubar texts

    # -- builders ---------------------------------------------------------

    def build_lagrangian(self) -> Lagrangian:
        density = parse_expression(self.density_text,
                                   parameters=tuple(self.parameters),
                                   functions=tuple(self.functions))
        return Lagrangian(order=self.order, density=density,
                          parameters=tuple(sorted(self.parameters)),
                          functions=tuple(sorted(self.functions)))

    def build_curve(self) -> BoundaryCurve:
        if self.curve_spec is None:
            raise ConfigError("this command needs a curve domain")
        spec = self.curve_spec
        X = parse_expression(spec["X"], parameters=("t",))
        U = parse_expression(spec["U"], parameters=("t",))
        return BoundaryCurve(X, U, spec["period"],
                             orientation=spec["orientation"])

    def function_values(self) -> dict:
        return {name: ExprFunction(parse_expression(text))
                for name, text in self.functions.items()}

    def function_exprs(self) -> dict:
        return {name: parse_expression(text)
                for name, text in self.functions.items()}


def _get_float(sec, key: str, where: str) -> float:
    raw = sec.get(key)
    if raw is None:
        raise ConfigError(f"missing {where}.{key}")
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{where}.{key} is not a number: {raw!r}") from None


def _parse_seed_tuples(text: str) -> list:
    out = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            out.append(tuple(float(p) for p in chunk.split(",")))
        except ValueError:
            raise ConfigError(f"bad seed tuple: {chunk!r}") from None
    if not out:
        raise ConfigError("solver.seeds is empty")
    return out


def load_config(path: str) -> ProblemConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")

    known = {"lagrangian", "parameters", "functions", "domain", "solver",
             "output", "transformation"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
    if "lagrangian" not in parser:
        raise ConfigError("missing [lagrangian] section")
    if "domain" not in parser:
        raise ConfigError("missing [domain] section")

    lsec = parser["lagrangian"]
    try:
        order = int(lsec.get("order", ""))
    except ValueError:
        raise ConfigError("lagrangian.order must be 1 or 2") from None
    if order not in (1, 2):
        raise ConfigError(f"lagrangian.order must be 1 or 2, got {order}")
    density_text = lsec.get("density")
    if not density_text:
        raise ConfigError("missing lagrangian.density")

    parameters = {}
    if "parameters" in parser:
        for name, raw in parser["parameters"].items():
            try:
                parameters[name] = float(raw)
            except ValueError:
                raise ConfigError(
                    f"parameter {name} is not a number: {raw!r}") from None

    functions = {}
    if "functions" in parser:
        for name, raw in parser["functions"].items():
            try:
                parse_expression(raw)
            except Exception as exc:
                raise ConfigError(f"function {name}: {exc}") from None
            functions[name] = raw

    dsec = parser["domain"]
    kind = dsec.get("kind", "").strip()
    if kind == "interval":
        a = _get_float(dsec, "a", "domain")
        b = _get_float(dsec, "b", "domain")
        if not a < b:
            raise ConfigError("domain needs a < b")
        interval, curve_spec = (a, b), None
        for key in ("x", "u", "period"):
            if key in dsec:
                raise ConfigError(
                    f"domain.{key} is a curve option; kind is interval")
    elif kind == "curve":
        for key in ("x", "u"):
            if not dsec.get(key):
                raise ConfigError(f"missing domain.{key.upper()} (curve text)")
        period = _get_float(dsec, "period", "domain")
        if not (period > 0 and math.isfinite(period)):
            raise ConfigError("domain.period must be positive")
        orientation = int(dsec.get("orientation", "1"))
        if orientation not in (1, -1):
            raise ConfigError("domain.orientation must be 1 or -1")
        for key in ("a", "b"):
            if key in dsec:
                raise ConfigError(
                    f"domain.{key} is an interval option; kind is curve")
        interval = None
        curve_spec = {"X": dsec.get("x"), "U": dsec.get("u"),
                      "period": period, "orientation": orientation}
    else:
        raise ConfigError("domain.kind must be 'interval' or 'curve'")

    ssec = parser["solver"] if "solver" in parser else {}
    tol = float(ssec.get("tol", _SOLVER_DEFAULTS["tol"]))
    if not 0 < tol < 1:
        raise ConfigError(f"solver.tol out of range: {tol:g}")
    seed = int(ssec.get("seed", _SOLVER_DEFAULTS["seed"]))
    nseeds = int(ssec.get("nseeds", _SOLVER_DEFAULTS["nseeds"]))
    if nseeds < 1:
        raise ConfigError("solver.nseeds must be at least 1")
    chart = ssec.get("chart", _SOLVER_DEFAULTS["chart"]).strip()
    if chart not in ("affine", "tubular"):
        raise ConfigError(f"solver.chart must be affine or tubular, "
                          f"got {chart!r}")
    step = float(ssec.get("step", _SOLVER_DEFAULTS["step"]))
    if not 0 < step < 10:
        raise ConfigError(f"solver.step out of range: {step:g}")
    max_points = int(ssec.get("max_points", _SOLVER_DEFAULTS["max_points"]))
    seeds = None
    if isinstance(ssec, configparser.SectionProxy) and ssec.get("seeds"):
        seeds = _parse_seed_tuples(ssec.get("seeds"))
    anchor = None
    if isinstance(ssec, configparser.SectionProxy) and ssec.get("anchor"):
        anchor = float(ssec.get("anchor"))
    grid = None
    if isinstance(ssec, configparser.SectionProxy) and ssec.get("grid"):
        try:
            grid = [float(p) for p in ssec.get("grid").split(",")]
        except ValueError:
            raise ConfigError("solver.grid must be comma-separated "
                              "numbers") from None

    out_dir = "out"
    if "output" in parser and parser["output"].get("out"):
        out_dir = parser["output"].get("out").strip()

    transformation = None
    if "transformation" in parser:
        tsec = parser["transformation"]
        for key in ("xbar", "ubar"):
            if not tsec.get(key):
                raise ConfigError(f"missing transformation.{key}")
        transformation = {"xbar": tsec.get("xbar"), "ubar": tsec.get("ubar")}

    return ProblemConfig(
        order=order, density_text=density_text, parameters=parameters,
        functions=functions, domain_kind=kind, interval=interval,
        curve_spec=curve_spec, tol=tol, seed=seed, nseeds=nseeds,
        chart=chart, step=step, max_points=max_points, seeds=seeds,
        anchor=anchor, grid=grid, out_dir=out_dir,
        transformation=transformation)
