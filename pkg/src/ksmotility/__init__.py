"""Numerics for a one-dimensional active-gel model of cell motility."""
__version__ = "0.1.0"

from .errors import ContinuationError, ConvergenceError, DomainError, NumericalFailure, SingularParameterError
from .numerics import Field, Grid, ModelParams
