"""freebound: variational problems with freely sliding boundary points.

A small library for first- and second-order variational problems on
planar domains whose endpoint(s) may slide along the domain boundary:

* symbolic jet calculus (partial/total derivatives, substitution),
* prolongation of planar coordinate changes to third-order jets,
* Euler-Lagrange expressions and natural boundary conditions, also in
  boundary-adapted charts,
* numeric solvers for the free-sliding elastic beam and for sliding
  geodesics (double normals), and
* a finite-difference oracle validating the symbolic layer.
"""

from ._tape import Tape, backend_name, compile_tape
from .exprs import (
    JET_VARIABLES,
    MAX_REJECT,
    Bindings,
    CallableFunction,
    DomainError,
    EvaluationError,
    Expr,
    ExpressionError,
    ExprFunction,
    JetPoint,
    ParseError,
    SamplingError,
    UnboundSymbolError,
    constant_function,
    evaluate,
    exprs_equal_numeric,
    free_symbols,
    function_names,
    jet_order,
    parse_expression,
    partial_derivative,
    print_expression,
    substitute,
    total_derivative,
)
from .prolongation import (
    ChartUnsuitableError,
    PointTransformation,
    ProlongationError,
    ProlongedTransformation,
    compose,
    contact_residual,
    prolong,
)
from .variational import (
    Lagrangian,
    NbcPair,
    VariationalError,
    euler_lagrange,
    natural_boundary_conditions,
    nbc_in_chart,
    pullback_lagrangian,
)
from .geometry import (
    TANGENCY_FLOOR,
    BoundaryChart,
    BoundaryCurve,
    GeometryError,
    ReachError,
    SampledCurve,
    affine_chart,
    chart_transformation,
    curve_frame,
    is_admissible,
    tubular_chart,
)
from .solve import (
    ContinuationPath,
    NewtonResult,
    ResidualSystem,
    SolverError,
    newton_solve,
    quadrature,
    trace_family,
)
from .beam import (
    BeamCoefficients,
    BeamError,
    BeamProblem,
    LocalFamily,
    NonCrossingError,
    ParticularSolution,
    SlidingSolution,
    SolveReport,
    beam_lagrangian,
    beam_value,
    endpoint_nbc_residual,
    linear_chart_nbc_closed_form,
    local_solution_family,
    particular_solution,
    reduced_coefficients,
    solve_free_sliding_beam,
)
from .geodesics import (
    ChordSolution,
    GeodesicReport,
    StripGeodesic,
    length_lagrangian,
    solve_closed_geodesics,
    solve_strip_geodesics,
    trace_closed_geodesic_family,
    transversality_residual,
)
from .oracle import (
    DecompositionReport,
    DiscreteActionConfig,
    OracleError,
    check_variation_decomposition,
    discrete_action,
    endpoint_jet,
    first_variation_fd,
    stencil_derivative,
)
from .config import ConfigError, ProblemConfig, load_config
from .verify import (
    run_all_suites,
    suite_decomposition,
    suite_invariance,
    suite_prolongation,
)

__version__ = "0.1.0"

__all__ = [
    "JET_VARIABLES",
    "MAX_REJECT",
    "TANGENCY_FLOOR",
    "BeamCoefficients",
    "BeamError",
    "BeamProblem",
    "Bindings",
    "BoundaryChart",
    "BoundaryCurve",
    "CallableFunction",
    "ChartUnsuitableError",
    "ChordSolution",
    "ConfigError",
    "ContinuationPath",
    "DecompositionReport",
    "DiscreteActionConfig",
    "DomainError",
    "EvaluationError",
    "Expr",
    "ExprFunction",
    "ExpressionError",
    "GeodesicReport",
    "GeometryError",
    "JetPoint",
    "Lagrangian",
    "LocalFamily",
    "NbcPair",
    "NewtonResult",
    "NonCrossingError",
    "OracleError",
    "ParseError",
    "ParticularSolution",
    "PointTransformation",
    "ProblemConfig",
    "ProlongationError",
    "ProlongedTransformation",
    "ReachError",
    "ResidualSystem",
    "SampledCurve",
    "SamplingError",
    "SlidingSolution",
    "SolveReport",
    "SolverError",
    "StripGeodesic",
    "Tape",
    "UnboundSymbolError",
    "VariationalError",
    "__version__",
    "affine_chart",
    "backend_name",
    "beam_lagrangian",
    "beam_value",
    "chart_transformation",
    "check_variation_decomposition",
    "compile_tape",
    "compose",
    "constant_function",
    "contact_residual",
    "curve_frame",
    "discrete_action",
    "endpoint_jet",
    "endpoint_nbc_residual",
    "euler_lagrange",
    "evaluate",
    "exprs_equal_numeric",
    "first_variation_fd",
    "free_symbols",
    "function_names",
    "is_admissible",
    "jet_order",
    "length_lagrangian",
    "linear_chart_nbc_closed_form",
    "load_config",
    "local_solution_family",
    "natural_boundary_conditions",
    "nbc_in_chart",
    "newton_solve",
    "parse_expression",
    "partial_derivative",
    "particular_solution",
    "print_expression",
    "prolong",
    "pullback_lagrangian",
    "quadrature",
    "reduced_coefficients",
    "run_all_suites",
    "solve_closed_geodesics",
    "solve_free_sliding_beam",
    "solve_strip_geodesics",
    "stencil_derivative",
    "substitute",
    "suite_decomposition",
    "suite_invariance",
    "suite_prolongation",
    "total_derivative",
    "trace_closed_geodesic_family",
    "trace_family",
    "transversality_residual",
]
