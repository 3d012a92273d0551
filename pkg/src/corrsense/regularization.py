"""Regularization parameter rules.

* ``select_lambda``: the ratio of the optimal subdifferential scalings of
  the corruption and signal profiles.
* ``tau_bounds_bounded`` / ``tau_bounds_subgaussian``: smallest penalties
  for which the dual-norm condition ``tau1 >= beta f*(Phi^T z)``,
  ``tau2 >= beta g*(z)`` holds with high probability.
* ``select_tau``: pick penalties above those bounds, either minimising the
  measurement requirement or the error bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigurationError, DomainError
from .geometry import L1, EtaProfile, eta2_closed_form_l1, estimate_gamma_mc, minimize_eta2, norm_by_tag
from .numeric import RngState, golden_section

__all__ = [
    "LambdaSelection",
    "select_lambda",
    "ball_complexity",
    "tau_bounds_bounded",
    "tau_bounds_subgaussian",
    "Regime",
    "Strategy",
    "TauSelection",
    "select_tau",
    "min_measurements_objective",
    "check_condition1",
    "condition1_terms",
    "NOISELESS_TAU",
]

NOISELESS_TAU = 1e-5


@dataclass(frozen=True)
class LambdaSelection:
    lambda1_star: float
    lambda2_star: float
    lambda_star: float
    profile_sig: EtaProfile
    profile_cor: EtaProfile


def select_lambda(n: int, s_sig: int, m: int, s_cor: int, min_scale: float = 1e-6) -> LambdaSelection:
    """Optimal scalings of both profiles and their ratio ``lambda2 / lambda1``.

    A fully dense block (``s == dim``) has its profile minimised at zero;
    the scaling is floored at ``min_scale`` so the ratio stays finite.
    """
    if n < 1 or m < 1:
        raise DomainError("degenerate subdifferential: dimension must be >= 1")
    ps, pc = minimize_eta2(n, s_sig), minimize_eta2(m, s_cor)
    l1 = max(ps.t_star, min_scale)
    l2 = max(pc.t_star, min_scale)
    return LambdaSelection(l1, l2, l2 / l1, ps, pc)


def ball_complexity(norm, dim: int, method: str = "mc", N: int = 2000, rng=0) -> float:
    """Gaussian complexity of the unit ball of ``norm`` in ``dim`` dimensions.

    ``mc`` estimates ``E f*(g)`` by Monte Carlo; ``asymptotic`` uses
    ``sqrt(2 ln dim)`` for l1; ``sqrt-dim`` uses ``sqrt(dim)``, the l2-ball
    value and an upper bound for the l1 ball.
    """
    norm = norm_by_tag(norm)
    if method == "sqrt-dim" or norm.tag == "l2" and method == "asymptotic":
        return math.sqrt(dim)
    if method == "asymptotic":
        return math.sqrt(2.0 * math.log(max(dim, 2)))
    if method == "mc":
        state = rng if isinstance(rng, RngState) else RngState(int(rng))
        return estimate_gamma_mc(norm.ball_sampler(dim), N, state.child("ball", norm.tag, dim))[0]
    raise ConfigurationError(f"unknown complexity method {method!r}", key="gamma_method")


def _check_beta(beta):
    if not beta > 1:
        raise DomainError("beta must exceed 1")


def tau_bounds_bounded(delta, beta, m, n, K=1.0, norms=(L1, L1), C=1.0,
                       gamma_method="mc", N=2000, rng=0):
    """Lower bounds ``(tau1, tau2)`` under ``||z||_2 <= delta``."""
    _check_beta(beta)
    if not delta >= 0:
        raise DomainError("delta must be >= 0")
    f, g = (norm_by_tag(t) for t in norms)
    gam = ball_complexity(f, n, gamma_method, N, rng)
    tau1 = C * K * delta * beta / math.sqrt(m) * (gam + math.sqrt(m) * f.radius)
    tau2 = beta * delta * g.radius
    return tau1, tau2


def tau_bounds_subgaussian(L, beta, m, n, K=1.0, norms=(L1, L1), C=1.0,
                           gamma_method="mc", N=2000, rng=0):
    """Lower bounds ``(tau1, tau2)`` for i.i.d. sub-Gaussian noise of norm ``L``."""
    _check_beta(beta)
    if not L > 0:
        raise DomainError("L must be > 0")
    f, g = (norm_by_tag(t) for t in norms)
    gam_f = ball_complexity(f, n, gamma_method, N, rng)
    gam_g = ball_complexity(g, m, gamma_method, N, rng)
    tau1 = C * K * (1.0 + L * L) * beta * (gam_f + math.sqrt(m) * f.radius)
    tau2 = C * L * beta * (gam_g + math.sqrt(m) * g.radius)
    return tau1, tau2


class Regime(str, Enum):
    NOISELESS = "noiseless"
    BOUNDED = "bounded"
    SUBGAUSSIAN = "subgaussian"


class Strategy(str, Enum):
    MIN_MEASUREMENTS = "min-measurements"
    MIN_ERROR = "min-error"


@dataclass(frozen=True)
class TauSelection:
    beta: float
    tau1: float
    tau2: float
    regime: Regime
    strategy: Strategy
    tau1_bound: float
    tau2_bound: float


def min_measurements_objective(dim, s, beta, norm=L1):
    """``tau -> J(tau) + (alpha / beta)^2 tau^2`` for an ``s``-sparse block."""
    a2 = norm_by_tag(norm).alpha(dim) ** 2 / beta**2
    return lambda tau: eta2_closed_form_l1(dim, s, tau) + a2 * tau * tau


def _argmin_above(dim, s, beta, bound, norm):
    if not np.isfinite(bound) or bound < 0:
        raise DomainError("empty feasible interval for tau")
    obj = min_measurements_objective(dim, s, beta, norm)
    return golden_section(obj, bound, bound + 10.0 * math.sqrt(dim), 1e-6)[0]


def select_tau(strategy, regime, *, n, m, s_sig=0, s_cor=0, beta=2.0, delta=0.0, L=1.0,
               K=1.0, C=1.0, norms=(L1, L1), gamma_method="mc", noiseless_tau=NOISELESS_TAU,
               N=2000, rng=0, bounds=None) -> TauSelection:
    """Penalties for the fully penalized program.

    ``bounds`` overrides the regime lower bounds when given.  The noiseless
    regime ignores ``strategy`` and returns ``noiseless_tau`` for both.
    """
    strategy, regime = Strategy(strategy), Regime(regime)
    _check_beta(beta)
    f, g = (norm_by_tag(t) for t in norms)
    if regime is Regime.NOISELESS:
        return TauSelection(beta, noiseless_tau, noiseless_tau, regime, strategy, 0.0, 0.0)
    if bounds is None:
        if regime is Regime.BOUNDED:
            bounds = tau_bounds_bounded(delta, beta, m, n, K, (f, g), C, gamma_method, N, rng)
        else:
            bounds = tau_bounds_subgaussian(L, beta, m, n, K, (f, g), C, gamma_method, N, rng)
    b1, b2 = (float(b) for b in bounds)
    if strategy is Strategy.MIN_ERROR:
        t1, t2 = b1, b2
    else:
        t1 = _argmin_above(n, s_sig, beta, b1, f)
        t2 = _argmin_above(m, s_cor, beta, b2, g)
    return TauSelection(beta, t1, t2, regime, strategy, b1, b2)


def condition1_terms(phi, z, norms=(L1, L1)):
    """Dual norms ``(f*(Phi^T z), g*(z))``."""
    f, g = (norm_by_tag(t) for t in norms)
    phi = np.asarray(phi, dtype=float)
    z = np.asarray(z, dtype=float)
    if phi.shape[0] != z.shape[-1]:
        raise DomainError("Phi rows and z length differ")
    return float(f.dual(phi.T @ z)), float(g.dual(z))


def check_condition1(tau1, tau2, beta, phi, z, norms=(L1, L1)) -> bool:
    fs, gs = condition1_terms(phi, z, norms)
    return bool(tau1 >= beta * fs and tau2 >= beta * gs)
