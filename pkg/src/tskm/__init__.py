"""Repair points violating mixed linear constraints by null-space elimination
followed by Sampling Kaczmarz-Motzkin iteration."""

from .model import (
    ConstraintSystem,
    ParseError,
    SolveResult,
    Termination,
    TransformedSystem,
    ValidationError,
    load_result,
    load_system,
    save_result,
    save_system,
    validate,
)
from .nullspace import InconsistentEqualities, InfeasibleFullRank, factorize, recover, transform
from .pipeline import batch_solve, naive_solve, tskm_solve
from .skm import AUTO, Sampling, SkmConfig, Variant

__all__ = [
    "AUTO",
    "ConstraintSystem",
    "InconsistentEqualities",
    "InfeasibleFullRank",
    "ParseError",
    "Sampling",
    "SkmConfig",
    "SolveResult",
    "Termination",
    "TransformedSystem",
    "ValidationError",
    "Variant",
    "batch_solve",
    "factorize",
    "load_result",
    "load_system",
    "naive_solve",
    "recover",
    "save_result",
    "save_system",
    "transform",
    "tskm_solve",
    "validate",
]

__version__ = "0.1.0"
