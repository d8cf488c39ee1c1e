"""Parameter identification for a diffusive logistic model.

Tensor-train cross global search over a parameter box, refined by
adjoint-gradient descent with the minimum-error step.
"""

from .adjoint import fd_gradient, gradient, solve_adjoint, solve_sensitivity
from .descent import DescentSettings, DescentTrace, minimize_gradient, step_size
from .errors import (
    DegenerateMatrixError,
    DivergenceError,
    EvaluationError,
    InvalidArgumentError,
    NumericalError,
    StabilityError,
    StalledError,
)
from .forward import Field, ObservationSet, SpaceTimeGrid, misfit, solve_forward
from .model import LogisticParams, ParameterVector, growth_rate, reaction
from .pipeline import (
    ExperimentSpec,
    InversionResult,
    combined_invert,
    export_report,
    generate_synthetic,
    load_spec,
)
from .ttopt import ParameterBox, maxvol, tt_minimize

__version__ = "0.1.0"

__all__ = [
    "DegenerateMatrixError",
    "DescentSettings",
    "DescentTrace",
    "DivergenceError",
    "EvaluationError",
    "ExperimentSpec",
    "Field",
    "InvalidArgumentError",
    "InversionResult",
    "LogisticParams",
    "NumericalError",
    "ObservationSet",
    "ParameterBox",
    "ParameterVector",
    "SpaceTimeGrid",
    "StabilityError",
    "StalledError",
    "combined_invert",
    "export_report",
    "fd_gradient",
    "generate_synthetic",
    "gradient",
    "growth_rate",
    "load_spec",
    "maxvol",
    "minimize_gradient",
    "misfit",
    "reaction",
    "solve_adjoint",
    "solve_forward",
    "solve_sensitivity",
    "step_size",
    "tt_minimize",
]
