"""Proximal maps and ball projections.

All functions act on the last axis, so a stack of vectors with shape
``(batch, d)`` is handled in one call; radii and thresholds broadcast
against the leading axes.
"""

import numpy as np

from .errors import DomainError


def _leading(param, u):
    p = np.asarray(param, dtype=float)
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise DomainError("threshold/radius must be finite and nonnegative")
    return p[..., None] if p.ndim else p


def soft_threshold(u, theta):
    """Coordinatewise ``sign(u) * max(|u| - theta, 0)``."""
    u = np.asarray(u, dtype=float)
    th = _leading(theta, u)
    return np.sign(u) * np.maximum(np.abs(u) - th, 0.0)


def project_l1_ball(u, r):
    """Euclidean projection onto ``{w : ||w||_1 <= r}``.

    Sort-based threshold selection: with ``a`` the magnitudes sorted in
    decreasing order, the shrinkage is ``(sum(a[:k]) - r) / k`` for the
    largest ``k`` keeping ``a[k-1]`` above it.
    """
    u = np.asarray(u, dtype=float)
    squeeze = u.ndim == 1
    U = np.atleast_2d(u)
    R = np.broadcast_to(np.asarray(r, dtype=float), U.shape[:-1])
    if np.any(R < 0) or not np.all(np.isfinite(R)):
        raise DomainError("radius must be finite and nonnegative")
    a = np.abs(U)
    out = U.copy()
    need = a.sum(axis=-1) > R
    if np.any(need):
        an = a[need]
        srt = -np.sort(-an, axis=-1)
        cs = np.cumsum(srt, axis=-1)
        k = np.arange(1, an.shape[-1] + 1)
        th = (cs - R[need][:, None]) / k
        # k = 1 always qualifies; the clamp covers r = 0 where it ties
        idx = np.maximum(np.sum(srt > th, axis=-1) - 1, 0)
        theta = np.maximum(th[np.arange(len(idx)), idx], 0.0)
        out[need] = np.sign(U[need]) * np.maximum(an - theta[:, None], 0.0)
    return out[0] if squeeze else out


def project_l2_ball(u, r):
    """Euclidean projection onto ``{w : ||w||_2 <= r}``; ``r = 0`` gives zero."""
    u = np.asarray(u, dtype=float)
    rr = _leading(r, u)
    nrm = np.linalg.norm(u, axis=-1, keepdims=True)
    scale = np.where(nrm > rr, rr / np.where(nrm > 0, nrm, 1.0), 1.0)
    return u * scale
