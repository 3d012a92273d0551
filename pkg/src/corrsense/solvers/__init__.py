"""Recovery programs: configuration, batched solvers and condition checks."""

from ..prox import project_l1_ball, soft_threshold
from .api import run_batch, solve, solve_batch, solve_constrained, solve_fully_penalized, solve_partially_penalized
from .base import Procedure, SolveConfig, SolveReport, fully_penalized_certificate, objective
from .core import BatchResult, fista_batch, joint_lipschitz, ladmm_batch
from .recovery import (
    RecoveryDiagnostic,
    constrained_error_bound,
    evaluate_recovery_condition,
    full_error_bound,
)

__all__ = [
    "BatchResult",
    "Procedure",
    "RecoveryDiagnostic",
    "SolveConfig",
    "SolveReport",
    "constrained_error_bound",
    "evaluate_recovery_condition",
    "fista_batch",
    "full_error_bound",
    "fully_penalized_certificate",
    "joint_lipschitz",
    "ladmm_batch",
    "objective",
    "project_l1_ball",
    "run_batch",
    "soft_threshold",
    "solve",
    "solve_batch",
    "solve_constrained",
    "solve_fully_penalized",
    "solve_partially_penalized",
]
