"""Procedure tags, solver configuration and reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from ..errors import ConfigurationError, DomainError


class Procedure(str, Enum):
    """The four recovery programs.

    * ``constrained-signal``: min |x|_1 s.t. |v|_1 <= kappa, |y - Phi x - v| <= delta
    * ``constrained-corruption``: min |v|_1 s.t. |x|_1 <= kappa, |y - Phi x - v| <= delta
    * ``partially-penalized``: min |x|_1 + lam |v|_1 s.t. |y - Phi x - v| <= delta
    * ``fully-penalized``: min 1/2 |y - Phi x - v|^2 + tau1 |x|_1 + tau2 |v|_1
    """

    CONSTRAINED_SIGNAL = "constrained-signal"
    CONSTRAINED_CORRUPTION = "constrained-corruption"
    PARTIALLY_PENALIZED = "partially-penalized"
    FULLY_PENALIZED = "fully-penalized"

    @classmethod
    def parse(cls, tag) -> "Procedure":
        if isinstance(tag, cls):
            return tag
        try:
            return cls(str(tag).strip().lower())
        except ValueError:
            raise ConfigurationError(f"unknown procedure {tag!r}", key="procedure") from None

    @property
    def constrained(self) -> bool:
        return self in (Procedure.CONSTRAINED_SIGNAL, Procedure.CONSTRAINED_CORRUPTION)


@dataclass(frozen=True)
class SolveConfig:
    """Solver inputs.

    ``kappa`` is the l1 bound of the constrained block; ``None`` means the
    exact value taken from the instance's ground truth.  ``delta=None``
    likewise uses the instance's radius.
    """

    procedure: Procedure = Procedure.CONSTRAINED_CORRUPTION
    delta: Optional[float] = None
    kappa: Optional[float] = None
    lam: float = 1.0
    tau1: float = 1e-5
    tau2: float = 1e-5
    tol: float = 1e-8
    max_iter: int = 20000
    rho: float = 1.0
    adaptive_rho: bool = False
    continuation: bool = True
    record_history: bool = True

    def __post_init__(self):
        object.__setattr__(self, "procedure", Procedure.parse(self.procedure))
        if self.delta is not None and not self.delta >= 0:
            raise DomainError("delta must be >= 0")
        if self.kappa is not None and not self.kappa >= 0:
            raise DomainError("kappa must be >= 0")
        if not self.rho > 0:
            raise DomainError("rho must be > 0")
        if not self.tol > 0 or int(self.max_iter) < 1:
            raise DomainError("tol must be > 0 and max_iter >= 1")
        if self.procedure is Procedure.PARTIALLY_PENALIZED and not self.lam > 0:
            raise DomainError("lambda must be > 0")
        if self.procedure is Procedure.FULLY_PENALIZED and not (self.tau1 > 0 and self.tau2 > 0):
            raise DomainError("tau1 and tau2 must be > 0")


@dataclass
class SolveReport:
    procedure: Procedure
    x_hat: np.ndarray
    v_hat: np.ndarray
    objective_value: float
    iterations: int
    converged: bool
    wall_time: float
    objective_history: np.ndarray = field(repr=False)
    primal_residuals: np.ndarray = field(repr=False)
    dual_residuals: np.ndarray = field(repr=False)
    stage_starts: tuple = ()
    relative_error: Optional[float] = None
    joint_error: Optional[float] = None


def objective(procedure, phi, y, x, v, lam=1.0, tau1=1.0, tau2=1.0):
    """Objective value of ``procedure`` at ``(x, v)`` (constraints not checked)."""
    procedure = Procedure.parse(procedure)
    x = np.asarray(x, float)
    v = np.asarray(v, float)
    if procedure is Procedure.CONSTRAINED_SIGNAL:
        return np.abs(x).sum(axis=-1)
    if procedure is Procedure.CONSTRAINED_CORRUPTION:
        return np.abs(v).sum(axis=-1)
    if procedure is Procedure.PARTIALLY_PENALIZED:
        return np.abs(x).sum(axis=-1) + lam * np.abs(v).sum(axis=-1)
    res = np.asarray(y, float) - np.einsum("...ij,...j->...i", np.asarray(phi, float), x) - v
    return 0.5 * np.sum(res**2, axis=-1) + tau1 * np.abs(x).sum(axis=-1) + tau2 * np.abs(v).sum(axis=-1)


def fully_penalized_certificate(phi, y, x, v, tau1, tau2) -> float:
    """Largest violation of the coordinatewise optimality conditions.

    With ``r = y - Phi x - v`` optimality means ``Phi^T r`` lies in
    ``tau1 * subdiff |x|_1`` and ``r`` in ``tau2 * subdiff |v|_1``.
    """
    phi = np.asarray(phi, float)
    r = np.asarray(y, float) - phi @ x - v

    def viol(c, z, tau):
        on = z != 0
        a = np.abs(c[on] - tau * np.sign(z[on]))
        b = np.maximum(np.abs(c[~on]) - tau, 0.0)
        return max(a.max(initial=0.0), b.max(initial=0.0))

    return float(max(viol(phi.T @ r, np.asarray(x, float), tau1), viol(r, np.asarray(v, float), tau2)))
