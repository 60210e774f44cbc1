"""Trust-region optimization with Birkhoff interpolation models.

Models mix function values with whichever partial derivatives an oracle can
supply.  Interpolation conditions are chosen greedily with pivot polynomials
so the data stay well poised inside the trust region.
"""
from .core import AvailableSet, DataSet, Datum, QuadraticModel
from .interp import NotPoised, birkhoff_polynomials, solve_model
from .pivot import CompletionFailure, complete, improve
from .poise import lambda_poisedness, poisedness_report

__version__ = "0.1.0"

__all__ = [
    "AvailableSet",
    "CompletionFailure",
    "DataSet",
    "Datum",
    "NotPoised",
    "QuadraticModel",
    "birkhoff_polynomials",
    "complete",
    "improve",
    "lambda_poisedness",
    "poisedness_report",
    "solve_model",
]
