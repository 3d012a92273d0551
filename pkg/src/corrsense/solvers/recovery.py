"""Measurement condition and error bounds from the cone complexity bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from ..errors import DomainError
from ..geometry import L1, GeometrySummary, eta2_closed_form_l1


@dataclass(frozen=True)
class RecoveryDiagnostic:
    """Complexity upper bounds per program, whether ``sqrt(m)`` clears
    ``C K^2 gamma + eps`` for each, and the implied error bounds."""

    m: int
    eps: float
    gamma_constrained: float
    gamma_partial: float
    gamma_full: Optional[float]
    ok_constrained: bool
    ok_partial: bool
    ok_full: Optional[bool]
    error_bound_constrained: float
    error_bound_partial: float
    error_bound_full: Optional[float]


def constrained_error_bound(delta, m, eps):
    """``2 delta sqrt(m) / eps``; shared by the constrained and partially penalized programs."""
    if not eps > 0:
        raise DomainError("eps must be > 0")
    return 2.0 * delta * math.sqrt(m) / eps


def full_error_bound(tau1, tau2, alpha_f, alpha_g, beta, m, eps):
    if not eps > 0:
        raise DomainError("eps must be > 0")
    return 2.0 * m * (beta + 1.0) * (tau1 * alpha_f + tau2 * alpha_g) / (beta * eps**2)


def evaluate_recovery_condition(geom: GeometrySummary, m: int, eps: float, K: float = 1.0,
                                C: float = 1.0, delta: float = 0.0, tau1=None, tau2=None,
                                beta: float = 2.0) -> RecoveryDiagnostic:
    """Check the measurement condition for all three programs.

    Complexity bounds: ``2 (w_f + w_g + 1)`` for the product cone;
    ``2 sqrt(J_f(l1*) + J_g(l2*)) + 1`` for the lambda-weighted cone; and
    ``2 (sqrt(J_f(tau1) + J_g(tau2)) + |(tau1 a_f, tau2 a_g)| / beta) + 1``
    for the fully penalized cone, where ``J`` is the expected squared
    distance profile and ``w = sqrt(min J)``.
    """
    if not eps > 0:
        raise DomainError("eps must be > 0")
    g1 = 2.0 * (geom.omega_sig + geom.omega_cor + 1.0)
    g2 = 2.0 * math.sqrt(geom.width_sig_sq + geom.width_cor_sq) + 1.0
    need = lambda g: math.sqrt(m) >= C * K * K * g + eps
    bound = constrained_error_bound(delta, m, eps)
    g3 = ok3 = eb3 = None
    if tau1 is not None and tau2 is not None:
        af, ag = L1.alpha(geom.n), L1.alpha(geom.m)
        jf = eta2_closed_form_l1(geom.n, geom.s_sig, tau1)
        jg = eta2_closed_form_l1(geom.m, geom.s_cor, tau2)
        g3 = 2.0 * (math.sqrt(jf + jg) + math.hypot(tau1 * af, tau2 * ag) / beta) + 1.0
        ok3 = need(g3)
        eb3 = full_error_bound(tau1, tau2, af, ag, beta, m, eps)
    return RecoveryDiagnostic(m, eps, g1, g2, g3, need(g1), need(g2), ok3, bound, bound, eb3)
