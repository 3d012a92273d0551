"""Independent reference solutions built on a generic conic solver."""

import cvxpy as cp
import numpy as np

from corrsense.solvers import Procedure


def conic_solve(procedure, phi, y, delta=0.0, kappa=0.0, lam=1.0, tau1=1.0, tau2=1.0):
    """Optimal value and minimiser of ``procedure`` solved by CLARABEL."""
    procedure = Procedure.parse(procedure)
    m, n = phi.shape
    x, v = cp.Variable(n), cp.Variable(m)
    res = y - phi @ x - v
    if procedure is Procedure.FULLY_PENALIZED:
        prob = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(res) + tau1 * cp.norm1(x) + tau2 * cp.norm1(v)))
    else:
        cons = [cp.norm(res, 2) <= delta]
        if procedure is Procedure.CONSTRAINED_SIGNAL:
            obj = cp.norm1(x)
            cons.append(cp.norm1(v) <= kappa)
        elif procedure is Procedure.CONSTRAINED_CORRUPTION:
            obj = cp.norm1(v)
            cons.append(cp.norm1(x) <= kappa)
        else:
            obj = cp.norm1(x) + lam * cp.norm1(v)
        prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    return float(prob.value), np.asarray(x.value), np.asarray(v.value)


def is_unique(procedure, phi, y, value, delta=0.0, kappa=0.0, lam=1.0, tau1=1.0, tau2=1.0, x0=None, v0=None, tol=1e-6):
    """Probe uniqueness: maximise the distance from ``(x0, v0)`` along random directions
    over the (near) optimal set; unique if no direction moves further than ``tol``."""
    procedure = Procedure.parse(procedure)
    m, n = phi.shape
    rng = np.random.default_rng(0)
    x, v = cp.Variable(n), cp.Variable(m)
    res = y - phi @ x - v
    slack = 1e-8 * max(1.0, abs(value))
    if procedure is Procedure.FULLY_PENALIZED:
        cons = [0.5 * cp.sum_squares(res) + tau1 * cp.norm1(x) + tau2 * cp.norm1(v) <= value + slack]
    else:
        cons = [cp.norm(res, 2) <= delta]
        if procedure is Procedure.CONSTRAINED_SIGNAL:
            cons += [cp.norm1(x) <= value + slack, cp.norm1(v) <= kappa]
        elif procedure is Procedure.CONSTRAINED_CORRUPTION:
            cons += [cp.norm1(v) <= value + slack, cp.norm1(x) <= kappa]
        else:
            cons += [cp.norm1(x) + lam * cp.norm1(v) <= value + slack]
    for _ in range(4):
        d = rng.standard_normal(n + m)
        prob = cp.Problem(cp.Maximize(d[:n] @ (x - x0) + d[n:] @ (v - v0)), cons)
        try:
            prob.solve(solver=cp.CLARABEL)
        except cp.error.SolverError:
            return False
        if prob.value is None or prob.value > tol * np.linalg.norm(d) * 1e3:
            return False
    return True
