"""Instance-level entry points for the recovery programs."""

from __future__ import annotations

import time
from dataclasses import replace

import numpy as np

from ..ensemble import joint_error, relative_error
from ..errors import DomainError
from .base import Procedure, SolveConfig, SolveReport, objective
from .core import fista_batch, ladmm_batch


def _params(P, cfg: SolveConfig):
    delta = P.delta if cfg.delta is None else cfg.delta
    if cfg.procedure is Procedure.CONSTRAINED_SIGNAL:
        kappa = P.kappa_g if cfg.kappa is None else cfg.kappa
    elif cfg.procedure is Procedure.CONSTRAINED_CORRUPTION:
        kappa = P.kappa_f if cfg.kappa is None else cfg.kappa
    else:
        kappa = 0.0
    return float(delta), float(kappa)


def run_batch(phi, y, cfg: SolveConfig, delta, kappa=None, lam=None, tau1=None, tau2=None):
    """Solve a stack of problems sharing ``cfg``; per-instance parameters may be arrays."""
    if np.any(np.asarray(delta) < 0):
        raise DomainError("delta must be >= 0")
    if cfg.procedure is Procedure.FULLY_PENALIZED:
        return fista_batch(phi, y, cfg.tau1 if tau1 is None else tau1, cfg.tau2 if tau2 is None else tau2,
                           tol=cfg.tol, max_iter=cfg.max_iter, continuation=cfg.continuation,
                           record=cfg.record_history)
    return ladmm_batch(phi, y, cfg.procedure, delta, kappa, cfg.lam if lam is None else lam,
                       tol=cfg.tol, max_iter=cfg.max_iter, rho=cfg.rho,
                       adaptive_rho=cfg.adaptive_rho, record=cfg.record_history)


def solve_batch(instances, cfg: SolveConfig, lam=None, tau1=None, tau2=None):
    """Solve several instances (same shape) in lockstep; returns one report each."""
    instances = list(instances)
    if not instances:
        return []
    t0 = time.perf_counter()
    phi = np.stack([P.phi for P in instances])
    y = np.stack([P.y for P in instances])
    pars = [_params(P, cfg) for P in instances]
    delta = np.array([p[0] for p in pars])
    kappa = np.array([p[1] for p in pars])
    res = run_batch(phi, y, cfg, delta, kappa, lam, tau1, tau2)
    wall = (time.perf_counter() - t0) / len(instances)
    lam_b = np.broadcast_to(cfg.lam if lam is None else lam, (len(instances),))
    t1_b = np.broadcast_to(cfg.tau1 if tau1 is None else tau1, (len(instances),))
    t2_b = np.broadcast_to(cfg.tau2 if tau2 is None else tau2, (len(instances),))
    reports = []
    for b, P in enumerate(instances):
        x, v = res.X[b], res.V[b]
        obj = float(objective(cfg.procedure, P.phi, P.y, x, v, lam_b[b], t1_b[b], t2_b[b]))
        reports.append(SolveReport(
            cfg.procedure, x, v, obj, int(res.iterations[b]), bool(res.converged[b]), wall,
            res.objective[b], res.primal[b], res.dual[b], tuple(res.stage_starts[b]),
            relative_error(x, P.x), joint_error(x, v, P.x, P.v),
        ))
    return reports


def solve(P, cfg: SolveConfig) -> SolveReport:
    return solve_batch([P], cfg)[0]


def _with(cfg, procedure):
    if cfg.procedure is procedure:
        return cfg
    return replace(cfg, procedure=procedure)


def solve_fully_penalized(P, cfg: SolveConfig) -> SolveReport:
    return solve(P, _with(cfg, Procedure.FULLY_PENALIZED))


def solve_partially_penalized(P, cfg: SolveConfig) -> SolveReport:
    return solve(P, _with(cfg, Procedure.PARTIALLY_PENALIZED))


def solve_constrained(P, cfg: SolveConfig) -> SolveReport:
    """Constrained program; ``cfg.procedure`` picks which block is bounded."""
    if not cfg.procedure.constrained:
        cfg = _with(cfg, Procedure.CONSTRAINED_CORRUPTION)
    return solve(P, cfg)
