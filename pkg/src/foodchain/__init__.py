"""Tri-trophic food-chain model: equilibria, bifurcation thresholds,
simulation-based attractor analysis and response-family fitting."""

from ._jit import backend
from .model import (HOLLING_DEFAULT, IVLEV_DEFAULT, DomainError, Kind, ModelParams,
                    NoSolutionError, PreconditionError, ResponseSpec)

__version__ = "0.1.0"

__all__ = [
    "HOLLING_DEFAULT", "IVLEV_DEFAULT", "DomainError", "Kind", "ModelParams", "NoSolutionError",
    "PreconditionError", "ResponseSpec", "backend", "__version__",
]
