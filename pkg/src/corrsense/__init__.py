"""Corrupted sensing toolkit.

Recover a sparse signal and a sparse corruption from ``y = Phi x + v + z``:
problem generation, proximal solvers for the constrained and penalized
programs, Gaussian-geometry quantities that predict success, parameter
rules, an empirical matrix-deviation lab and experiment harness.
"""

from .ensemble import EnsembleSpec, MatrixFamily, NoiseSpec, ProblemInstance, assemble
from .errors import ConfigurationError, ConvergenceError, CorrsenseError, DomainError, NumericalError
from .geometry import GeometrySummary, eta2_closed_form_l1, minimize_eta2, summarize_geometry
from .numeric import RngState
from .regularization import select_lambda, select_tau
from .solvers import Procedure, SolveConfig, SolveReport, solve, solve_batch

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ConvergenceError",
    "CorrsenseError",
    "DomainError",
    "EnsembleSpec",
    "GeometrySummary",
    "MatrixFamily",
    "NoiseSpec",
    "NumericalError",
    "ProblemInstance",
    "Procedure",
    "RngState",
    "SolveConfig",
    "SolveReport",
    "assemble",
    "eta2_closed_form_l1",
    "minimize_eta2",
    "select_lambda",
    "select_tau",
    "solve",
    "solve_batch",
    "summarize_geometry",
]
