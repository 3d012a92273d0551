"""Batched first-order cores.

Both solvers take a stack of problems ``Phi`` with shape ``(B, m, n)`` and
run them in lockstep; an instance that meets its stopping rule is frozen
and dropped from the working set, so results do not depend on which other
instances share the batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numeric import spectral_norm
from ..prox import project_l1_ball, project_l2_ball, soft_threshold
from .base import Procedure

# step-size safety factor over the power-iteration estimate of ||[Phi, I]||^2
_STEP_SAFETY = 1.01


@dataclass
class BatchResult:
    X: np.ndarray
    V: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    objective: list
    primal: list
    dual: list
    stage_starts: list


def joint_lipschitz(Phi) -> np.ndarray:
    """``||[Phi_b, I]||^2 = sigma_max(Phi_b)^2 + 1`` with a safety margin."""
    sig = np.array([spectral_norm(P) for P in Phi])
    return _STEP_SAFETY * (sig**2 + 1.0)


def _mv(P, x):
    return np.einsum("bij,bj->bi", P, x)


def _rmv(P, r):
    return np.einsum("bij,bi->bj", P, r)


def _l1(a):
    return np.abs(a).sum(axis=1)


class _Recorder:
    def __init__(self, max_iter, B, names, enabled):
        self.enabled = enabled
        self.data = {k: np.full((max_iter, B), np.nan) for k in names} if enabled else {}

    def put(self, it, idx, **vals):
        if self.enabled:
            for k, v in vals.items():
                self.data[k][it, idx] = v

    def trim(self, name, iters):
        if not self.enabled:
            return [np.empty(0) for _ in iters]
        return [self.data[name][:k, b].copy() for b, k in enumerate(iters)]


def ladmm_batch(Phi, Y, procedure, delta, kappa=None, lam=None, *, tol=1e-8, max_iter=20000,
                rho=1.0, adaptive_rho=False, record=True, lipschitz=None) -> BatchResult:
    """Linearized ADMM for the constrained and partially penalized programs.

    Splits ``Phi x + v + r = y`` with ``|r| <= delta``.  The ``(x, v)`` block
    takes one proximal-gradient step on the augmented term (step ``1/L``,
    ``L >= ||[Phi, I]||^2``): soft thresholding for penalized blocks, l1-ball
    projection for constrained ones.  ``r`` is the exact projection onto the
    ``delta`` ball (a point when ``delta = 0``).  Scaled dual ascent follows.

    Stops when ``|Phi x + v + r - y| / max(1, |y|)`` and
    ``rho (L |ds| + |dr|) / max(1, rho |u|)`` both fall below ``tol``.
    """
    proc = Procedure.parse(procedure)
    Phi = np.asarray(Phi, float)
    Y = np.asarray(Y, float)
    B, m, n = Phi.shape
    delta = np.broadcast_to(np.asarray(delta, float), (B,)).copy()
    kappa = np.broadcast_to(np.asarray(0.0 if kappa is None else kappa, float), (B,)).copy()
    lam = np.broadcast_to(np.asarray(1.0 if lam is None else lam, float), (B,)).copy()
    Lall = joint_lipschitz(Phi) if lipschitz is None else np.asarray(lipschitz, float)
    rho_all = np.full(B, float(rho))

    X, V = np.zeros((B, n)), np.zeros((B, m))
    iters = np.full(B, max_iter)
    conv = np.zeros(B, bool)
    rec = _Recorder(max_iter, B, ("obj", "pri", "dua"), record)

    act = np.arange(B)
    P, y, d, k, lm, L, rh = Phi, Y, delta, kappa, lam, Lall, rho_all
    x, v = np.zeros((B, n)), np.zeros((B, m))
    r, u, Px = np.zeros((B, m)), np.zeros((B, m)), np.zeros((B, m))
    ynorm = np.maximum(1.0, np.linalg.norm(y, axis=1))

    for it in range(max_iter):
        q = Px + v + r - y + u
        xs = x - _rmv(P, q) / L[:, None]
        vs = v - q / L[:, None]
        step = 1.0 / (rh * L)
        if proc is Procedure.CONSTRAINED_SIGNAL:
            xn, vn = soft_threshold(xs, step), project_l1_ball(vs, k)
            obj = _l1(xn)
        elif proc is Procedure.CONSTRAINED_CORRUPTION:
            xn, vn = project_l1_ball(xs, k), soft_threshold(vs, step)
            obj = _l1(vn)
        else:
            xn, vn = soft_threshold(xs, step), soft_threshold(vs, lm * step)
            obj = _l1(xn) + lm * _l1(vn)
        Pxn = _mv(P, xn)
        rn = project_l2_ball(y - Pxn - vn - u, d)
        p = Pxn + vn + rn - y
        u = u + p
        ds = np.sqrt(np.sum((xn - x) ** 2, axis=1) + np.sum((vn - v) ** 2, axis=1))
        dr = np.linalg.norm(rn - r, axis=1)
        pri_abs = np.linalg.norm(p, axis=1)
        dua_abs = rh * (L * ds + dr)
        pri = pri_abs / ynorm
        dua = dua_abs / np.maximum(1.0, rh * np.linalg.norm(u, axis=1))
        x, v, r, Px = xn, vn, rn, Pxn
        rec.put(it, act, obj=obj, pri=pri, dua=dua)

        if adaptive_rho and it % 10 == 9:
            up = pri_abs > 10 * dua_abs
            down = dua_abs > 10 * pri_abs
            rh = np.where(up, 2 * rh, np.where(down, rh / 2, rh))
            u = np.where(up[:, None], u / 2, np.where(down[:, None], u * 2, u))

        done = (pri <= tol) & (dua <= tol)
        if done.any():
            ids = act[done]
            X[ids], V[ids] = x[done], v[done]
            iters[ids] = it + 1
            conv[ids] = True
            keep = ~done
            act = act[keep]
            if act.size == 0:
                break
            P, y, d, k, lm, L, rh = P[keep], y[keep], d[keep], k[keep], lm[keep], L[keep], rh[keep]
            x, v, r, u, Px, ynorm = x[keep], v[keep], r[keep], u[keep], Px[keep], ynorm[keep]
    if act.size:
        X[act], V[act] = x, v

    return BatchResult(X, V, iters, conv, rec.trim("obj", iters), rec.trim("pri", iters),
                       rec.trim("dua", iters), [(0,)] * B)


def fista_batch(Phi, Y, tau1, tau2, *, tol=1e-8, max_iter=20000, continuation=True,
                record=True, lipschitz=None, shrink=0.2, stage_tol=1e-6) -> BatchResult:
    """FISTA with monotone function-value restart for the fully penalized program.

    Smooth part ``1/2 |y - Phi x - v|^2`` on ``s = (x, v)`` with step
    ``1/L``; separable soft-thresholding prox.  When the accelerated
    candidate raises the objective, a plain proximal-gradient step from the
    current point is taken instead and momentum resets, so the objective
    never increases within a stage.

    With ``continuation`` the penalties start at a multiple ``c`` of the
    targets and ``c`` shrinks by ``shrink`` each time the relative step
    falls below ``stage_tol``, warm starting every stage.  The stopping rule
    (relative objective change and gradient-mapping norm below ``tol``) is
    only applied at the target penalties.
    """
    Phi = np.asarray(Phi, float)
    Y = np.asarray(Y, float)
    B, m, n = Phi.shape
    t1 = np.broadcast_to(np.asarray(tau1, float), (B,)).copy()
    t2 = np.broadcast_to(np.asarray(tau2, float), (B,)).copy()
    Lall = joint_lipschitz(Phi) if lipschitz is None else np.asarray(lipschitz, float)

    gy = _rmv(Phi, Y)
    gscale = np.maximum(1.0, np.sqrt(np.sum(gy**2, axis=1) + np.sum(Y**2, axis=1)))
    if continuation:
        c0 = 0.5 * np.maximum(np.abs(gy).max(axis=1) / t1, np.abs(Y).max(axis=1) / t2)
        c_all = np.maximum(c0, 1.0)
    else:
        c_all = np.ones(B)

    X, V = np.zeros((B, n)), np.zeros((B, m))
    iters = np.full(B, max_iter)
    conv = np.zeros(B, bool)
    rec = _Recorder(max_iter, B, ("obj", "pri", "dua"), record)
    stages = [[0] for _ in range(B)]

    act = np.arange(B)
    P, y, L, a1, a2, c, gs = Phi, Y, Lall, t1, t2, c_all, gscale
    x, v = np.zeros((B, n)), np.zeros((B, m))
    zx, zv = x.copy(), v.copy()
    res = -y.copy()  # Phi x + v - y at the current point
    t = np.ones(B)
    F = 0.5 * np.sum(res**2, axis=1)

    def prox_step(Pb, px, pv, pres, T1, T2, Lw):
        xn = soft_threshold(px - _rmv(Pb, pres) / Lw[:, None], T1 / Lw)
        vn = soft_threshold(pv - pres / Lw[:, None], T2 / Lw)
        return xn, vn

    for it in range(max_iter):
        T1, T2 = c * a1, c * a2
        rz = _mv(P, zx) + zv - y
        xn, vn = prox_step(P, zx, zv, rz, T1, T2, L)
        rn = _mv(P, xn) + vn - y
        Fn = 0.5 * np.sum(rn**2, axis=1) + T1 * _l1(xn) + T2 * _l1(vn)
        gm = L * np.sqrt(np.sum((zx - xn) ** 2, axis=1) + np.sum((zv - vn) ** 2, axis=1))
        bad = Fn > F
        if bad.any():
            bx, bv = prox_step(P[bad], x[bad], v[bad], res[bad], T1[bad], T2[bad], L[bad])
            xn[bad], vn[bad] = bx, bv
            rn[bad] = _mv(P[bad], bx) + bv - y[bad]
            Fn[bad] = 0.5 * np.sum(rn[bad] ** 2, axis=1) + T1[bad] * _l1(bx) + T2[bad] * _l1(bv)
            gm[bad] = L[bad] * np.sqrt(np.sum((x[bad] - bx) ** 2, axis=1) + np.sum((v[bad] - bv) ** 2, axis=1))
        tn = np.where(bad, 1.0, 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t)))
        mom = np.where(bad, 0.0, (t - 1.0) / tn)
        step = np.sqrt(np.sum((xn - x) ** 2, axis=1) + np.sum((vn - v) ** 2, axis=1))
        snorm = np.sqrt(np.sum(xn**2, axis=1) + np.sum(vn**2, axis=1))
        zx = xn + mom[:, None] * (xn - x)
        zv = vn + mom[:, None] * (vn - v)
        rel = np.abs(F - Fn) / np.maximum(np.abs(Fn), np.finfo(float).tiny)
        x, v, res, F, t = xn, vn, rn, Fn, tn
        gmr = gm / gs
        rec.put(it, act, obj=Fn, pri=rel, dua=gmr)

        final = c <= 1.0
        stage_done = ~final & (step <= stage_tol * np.maximum(1.0, snorm))
        if stage_done.any():
            c = np.where(stage_done, np.maximum(c * shrink, 1.0), c)
            t = np.where(stage_done, 1.0, t)
            zx = np.where(stage_done[:, None], x, zx)
            zv = np.where(stage_done[:, None], v, zv)
            F = np.where(stage_done, 0.5 * np.sum(res**2, axis=1) + c * a1 * _l1(x) + c * a2 * _l1(v), F)
            for b in act[stage_done]:
                stages[b].append(it + 1)

        done = final & (rel <= tol) & (gmr <= tol)
        if done.any():
            ids = act[done]
            X[ids], V[ids] = x[done], v[done]
            iters[ids] = it + 1
            conv[ids] = True
            keep = ~done
            act = act[keep]
            if act.size == 0:
                break
            P, y, L, a1, a2, c, gs = P[keep], y[keep], L[keep], a1[keep], a2[keep], c[keep], gs[keep]
            x, v, zx, zv, res, t, F = x[keep], v[keep], zx[keep], zv[keep], res[keep], t[keep], F[keep]
    if act.size:
        X[act], V[act] = x, v

    return BatchResult(X, V, iters, conv, rec.trim("obj", iters), rec.trim("pri", iters),
                       rec.trim("dua", iters), [tuple(s) for s in stages])
