"""Target-zone trading: closed-form value, smoothed HJB, reflected Monte Carlo and PDE solvers."""

from targetzone.closed_form import ClosedForm
from targetzone.model import (
    ClosedFormOptimal,
    Constant,
    DomainError,
    ModelParams,
    ParameterError,
    RegularizedOptimal,
    Scaled,
    Tabulated,
    Zero,
    eval_strategy,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "ClosedForm",
    "ClosedFormOptimal",
    "Constant",
    "DomainError",
    "ModelParams",
    "ParameterError",
    "RegularizedOptimal",
    "Scaled",
    "Tabulated",
    "Zero",
    "eval_strategy",
    "validate",
]
