from .errors import (
    ConfigError,
    ConvergenceError,
    CsvFormatError,
    InfeasibleConstraintError,
    NumericalError,
    SingularSubproblemError,
    TwimputeError,
    UnsupportedCostError,
)
from .core import ImputationResult, TimeSeriesPanel, TraceSegment, TwiConfig, read_csv, write_csv
from .transport import TransportPlan, solve_1d_monotone, solve_exact, solve_sinkhorn
from .objective import QuadraticForm, assemble_H, eval_F, gradient_F
from .constraints import (
    Box,
    ConstraintSet,
    CumulativeSum,
    Intersection,
    LinearEquality,
    ObservedEquality,
    Simplex,
)
from .solver import (
    em_identity_check,
    impute,
    impute_integrated,
    k_twi,
    single_missing_weights,
    solve_subproblem,
    stationarity_residuals,
    twi,
)
from .config import RunConfig


__all__ = [
    "ConfigError",
    "ConvergenceError",
    "CsvFormatError",
    "InfeasibleConstraintError",
    "NumericalError",
    "SingularSubproblemError",
    "TwimputeError",
    "UnsupportedCostError",
    "ImputationResult",
    "TimeSeriesPanel",
    "TraceSegment",
    "TwiConfig",
    "read_csv",
    "write_csv",
    "TransportPlan",
    "solve_1d_monotone",
    "solve_exact",
    "solve_sinkhorn",
    "QuadraticForm",
    "assemble_H",
    "eval_F",
    "gradient_F",
    "Box",
    "ConstraintSet",
    "CumulativeSum",
    "Intersection",
    "LinearEquality",
    "ObservedEquality",
    "Simplex",
    "em_identity_check",
    "impute",
    "impute_integrated",
    "k_twi",
    "single_missing_weights",
    "solve_subproblem",
    "stationarity_residuals",
    "twi",
    "RunConfig",
]

__version__ = "0.1.0"
