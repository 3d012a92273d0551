"""Convex geometry of sparse signal/corruption pairs.

Covers the norm interface (l1 and l2), squared distances to scaled
subdifferentials, the closed-form expected squared distance for sparse
vectors and its minimiser, Monte Carlo complexity estimates, and the
recovery threshold ``w(n, s_sig) + w(m, s_cor) = m``.

The descent cone of the l1 norm at ``x`` has polar ``cone(subdiff |x|_1)``,
so the length of the projection of ``g`` onto the cone equals
``min_{t >= 0} dist(g, t * subdiff)``.  That minimum is a convex piecewise
quadratic in ``t`` and is solved exactly (``_min_scaled_dist2``); it drives
the cone samplers used for complexity estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .numeric import RngState, gaussian_upper_tail, golden_section
from .prox import project_l1_ball, project_l2_ball, soft_threshold

__all__ = [
    "NormSpec",
    "L1",
    "L2",
    "norm_by_tag",
    "dist_to_scaled_subdiff_l1",
    "eta2_closed_form_l1",
    "EtaProfile",
    "minimize_eta2",
    "eta_bracket",
    "estimate_gamma_mc",
    "width_surrogate",
    "threshold_curve",
    "threshold_crossing",
    "threshold_polyline",
    "sandwich_check",
    "FiniteSetSampler",
    "DualNormSampler",
    "DescentConeSampler",
    "ProductConeSampler",
    "WeightedConeSampler",
    "GeometrySummary",
    "summarize_geometry",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _dense(x) -> np.ndarray:
    if hasattr(x, "dense"):
        return x.dense()
    return np.asarray(x, dtype=float)


# --- norms ----------------------------------------------------------------


@dataclass(frozen=True)
class NormSpec:
    """A structure-promoting norm with the operations the solvers and bounds need.

    ``dist_to_scaled_subdiff`` returns the *squared* distance from ``g`` to
    ``t`` times the subdifferential at ``x``.  ``radius`` is the largest l2
    norm on the unit ball of the norm (1 for both l1 and l2).
    """

    tag: str

    def __post_init__(self):
        if self.tag not in ("l1", "l2"):
            raise DomainError(f"unsupported norm {self.tag!r}")

    radius = 1.0

    def evaluate(self, u):
        u = np.asarray(u, dtype=float)
        if self.tag == "l1":
            return np.abs(u).sum(axis=-1)
        return np.linalg.norm(u, axis=-1)

    def dual(self, u):
        u = np.asarray(u, dtype=float)
        if self.tag == "l1":
            return np.abs(u).max(axis=-1)
        return np.linalg.norm(u, axis=-1)

    def prox(self, u, theta):
        if self.tag == "l1":
            return soft_threshold(u, theta)
        u = np.asarray(u, dtype=float)
        nrm = np.linalg.norm(u, axis=-1, keepdims=True)
        keep = np.maximum(1.0 - np.asarray(theta, float) / np.where(nrm > 0, nrm, 1.0), 0.0)
        return u * keep

    def project_ball(self, u, r):
        if self.tag == "l1":
            return project_l1_ball(u, r)
        return project_l2_ball(u, r)

    def alpha(self, dim: int) -> float:
        """Compatibility constant ``sup f(u) / ||u||_2`` in dimension ``dim``."""
        return math.sqrt(dim) if self.tag == "l1" else 1.0

    def dist_to_scaled_subdiff(self, g, x, t):
        if t < 0:
            raise DomainError("t must be >= 0")
        if self.tag == "l1":
            return dist_to_scaled_subdiff_l1(g, x, t)
        g = np.asarray(g, dtype=float)
        x = _dense(x)
        nx = np.linalg.norm(x)
        if nx > 0:
            return np.sum((g - t * x / nx) ** 2, axis=-1)
        return np.maximum(np.linalg.norm(g, axis=-1) - t, 0.0) ** 2

    def ball_sampler(self, dim: int) -> "DualNormSampler":
        """Sampler whose complexity is that of the unit ball of this norm."""
        return DualNormSampler(self, dim)


L1 = NormSpec("l1")
L2 = NormSpec("l2")


def norm_by_tag(tag) -> NormSpec:
    if isinstance(tag, NormSpec):
        return tag
    return NormSpec(str(tag).lower())


# --- squared distance profiles ---------------------------------------------


def dist_to_scaled_subdiff_l1(g, x, t):
    """Squared distance from ``g`` to ``t`` times the l1 subdifferential at ``x``.

    On the support each coordinate is pinned to ``t * sign(x_i)``; off the
    support the subdifferential is ``[-t, t]``.  ``g`` may carry leading
    batch axes.
    """
    if not t >= 0:
        raise DomainError("t must be >= 0")
    g = np.asarray(g, dtype=float)
    x = _dense(x)
    if g.shape[-1] != x.shape[-1]:
        raise DomainError("dimension mismatch between g and x")
    on = x != 0
    d_on = g[..., on] - t * np.sign(x[on])
    d_off = np.maximum(np.abs(g[..., ~on]) - t, 0.0)
    return np.sum(d_on**2, axis=-1) + np.sum(d_off**2, axis=-1)


def _check_ns(n, s):
    if n < 1 or s < 0 or s > n:
        raise DomainError(f"need 0 <= s <= n and n >= 1, got n={n}, s={s}")


def eta2_closed_form_l1(n, s, t):
    """Expected squared distance from N(0, I_n) to ``t`` times the l1
    subdifferential at an ``s``-sparse point.

    ``s`` may be real valued (the expression is affine in ``s``), which
    gives a continuous threshold for contour comparisons.
    """
    _check_ns(n, s)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("t must be >= 0")
    tt = 1.0 + t * t
    tail = gaussian_upper_tail(t)
    off = 2.0 * (n - s) * _INV_SQRT_2PI * (tt * tail - t * np.exp(-0.5 * t * t))
    out = s * tt + off
    return float(out) if out.ndim == 0 else out


def eta_bracket(n) -> float:
    """Upper end of the search interval for the optimal scaling."""
    return math.sqrt(2.0 * math.log(max(n, 2))) + 3.0


@dataclass(frozen=True)
class EtaProfile:
    dim: int
    sparsity: float
    t_star: float
    J_min: float
    curve: np.ndarray = field(repr=False)  # shape (k, 2): columns t, J
    norm: NormSpec = L1

    def __call__(self, t):
        return eta2_closed_form_l1(self.dim, self.sparsity, t)


def minimize_eta2(n: int, s, tol: float = 1e-6, samples: int = 64) -> EtaProfile:
    _check_ns(n, s)
    hi = eta_bracket(n)
    t_star, j_min = golden_section(lambda t: eta2_closed_form_l1(n, s, t), 0.0, hi, tol)
    ts = np.linspace(0.0, hi, max(samples, 64))
    curve = np.column_stack([ts, eta2_closed_form_l1(n, s, ts)])
    return EtaProfile(n, s, t_star, j_min, curve)


@lru_cache(maxsize=65536)
def _width_cached(n, s):
    return minimize_eta2(n, s).J_min


def width_surrogate(n: int, s) -> float:
    """Squared-width surrogate ``min_t J(t)`` of the l1 descent cone."""
    _check_ns(n, s)
    return _width_cached(int(n), s)


def threshold_curve(m: int, n: int):
    """Largest integer ``s_cor`` with ``w(n, s_sig) + w(m, s_cor) <= m`` per ``s_sig``.

    Rows where even ``s_cor = 0`` is infeasible are omitted.
    """
    if m < 1 or n < 1:
        raise DomainError("m and n must be >= 1")
    out = []
    for s_sig in range(n + 1):
        ws = width_surrogate(n, s_sig)
        if ws + width_surrogate(m, 0) > m:
            continue
        lo, hi = 0, m  # invariant: lo feasible
        if ws + width_surrogate(m, hi) <= m:
            lo = hi
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ws + width_surrogate(m, mid) <= m:
                lo = mid
            else:
                hi = mid
        out.append((s_sig, lo))
    return out


def threshold_crossing(m: int, n: int, s_sig: float, tol: float = 1e-6):
    """Real-valued ``s_cor`` on the threshold for a real ``s_sig``; None if infeasible."""
    ws = minimize_eta2(n, s_sig).J_min
    budget = m - ws
    if minimize_eta2(m, 0).J_min > budget:
        return None
    lo, hi = 0.0, float(m)
    if minimize_eta2(m, hi).J_min <= budget:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if minimize_eta2(m, mid).J_min <= budget:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def threshold_polyline(m: int, n: int, samples: int = 129) -> np.ndarray:
    """Dense real-valued threshold curve, ending where it meets ``s_cor = 0``."""
    pts = []
    s_end = None
    for s in np.linspace(0.0, n, samples):
        c = threshold_crossing(m, n, s)
        if c is None:
            s_end = s
            break
        pts.append((s, c))
    if s_end is not None and pts:
        lo, hi = pts[-1][0], s_end
        w0 = minimize_eta2(m, 0).J_min
        while hi - lo > 1e-6:
            mid = 0.5 * (lo + hi)
            if minimize_eta2(n, mid).J_min + w0 <= m:
                lo = mid
            else:
                hi = mid
        pts.append((lo, 0.0))
    return np.array(pts)


# --- Monte Carlo complexity --------------------------------------------------


def estimate_gamma_mc(sampler, N: int, rng, chunk: int = 4096):
    """Monte Carlo estimate of ``E sup_{u in T} |<g, u>|`` with jackknife SE.

    ``sampler`` exposes ``dim`` and maps a batch of Gaussian rows ``(k, dim)``
    to the per-row suprema.  Returns ``(estimate, standard_error)``.
    """
    if N < 2:
        raise DomainError("N must be >= 2")
    state = rng if isinstance(rng, RngState) else RngState(int(rng))
    gen = state.generator()
    vals = np.empty(N)
    for start in range(0, N, chunk):
        k = min(chunk, N - start)
        vals[start:start + k] = sampler(gen.standard_normal((k, sampler.dim)))
    total = vals.sum()
    loo = (total - vals) / (N - 1)
    se = math.sqrt((N - 1) / N * np.sum((loo - loo.mean()) ** 2))
    return float(vals.mean()), float(se)


class FiniteSetSampler:
    """``sup |<g, u>|`` over the rows of a finite point array."""

    def __init__(self, points):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.dim = self.points.shape[1]

    def __call__(self, G):
        return np.abs(G @ self.points.T).max(axis=1)


class DualNormSampler:
    """Sup over the unit ball of a norm, i.e. the dual norm of ``g``."""

    def __init__(self, norm: NormSpec, dim: int):
        self.norm = norm_by_tag(norm)
        self.dim = int(dim)

    def __call__(self, G):
        return self.norm.dual(G)


def _min_scaled_dist2(C, w_on, D, w_off):
    """Row-wise ``min_{t>=0} sum (C - w_on t)^2 + sum (D - w_off t)_+^2``.

    ``C`` holds signed on-support coordinates, ``D`` off-support magnitudes.
    The derivative is increasing and piecewise linear with kinks at
    ``D / w_off``; the active piece is the first one, in decreasing kink
    order, whose stationary point lies right of its lower kink.
    """
    N = C.shape[0] if C.size else D.shape[0]
    num0 = C @ w_on if C.size else np.zeros(N)
    den0 = float(np.sum(w_on**2))
    q = D.shape[1]
    if q:
        kinks = D / w_off
        order = np.argsort(-kinks, axis=1)
        ks = np.take_along_axis(kinks, order, axis=1)
        wo = w_off[order]
        dv = np.take_along_axis(D, order, axis=1)
        num = np.concatenate([num0[:, None], num0[:, None] + np.cumsum(wo * dv, axis=1)], axis=1)
        den = den0 + np.concatenate([np.zeros((N, 1)), np.cumsum(wo**2, axis=1)], axis=1)
        lower = np.concatenate([ks, np.zeros((N, 1))], axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            tk = np.where(den > 0, num / np.where(den > 0, den, 1.0), lower)
        ok = tk >= lower
        k = np.argmax(ok, axis=1)
        # no valid piece means the derivative is already positive at t = 0
        t = np.where(ok.any(axis=1), tk[np.arange(N), k], 0.0)
    else:
        t = num0 / den0 if den0 > 0 else np.zeros(N)
    t = np.maximum(t, 0.0)
    val = np.zeros(N)
    if C.size:
        val += np.sum((C - w_on * t[:, None]) ** 2, axis=1)
    if q:
        val += np.sum(np.maximum(D - w_off * t[:, None], 0.0) ** 2, axis=1)
    return val


class _ConeBlock:
    """One l1 block (support/sign pattern, weight) of a descent cone."""

    def __init__(self, x, weight=1.0):
        x = _dense(x)
        self.dim = x.size
        self.on = np.flatnonzero(x)
        self.off = np.flatnonzero(x == 0)
        self.sign = np.sign(x[self.on])
        self.weight = float(weight)

    def split(self, G):
        C = G[:, self.on] * self.sign
        D = np.abs(G[:, self.off])
        return C, np.full(self.on.size, self.weight), D, np.full(self.off.size, self.weight)


def _cone_proj_norm(blocks, parts):
    """Projection length onto the descent cone of ``sum_k w_k |.|_1`` (single scaling)."""
    Cs, Wn, Ds, Wf = [], [], [], []
    for blk, G in zip(blocks, parts):
        C, wn, D, wf = blk.split(G)
        Cs.append(C), Wn.append(wn), Ds.append(D), Wf.append(wf)
    C = np.concatenate(Cs, axis=1)
    D = np.concatenate(Ds, axis=1)
    return np.sqrt(_min_scaled_dist2(C, np.concatenate(Wn), D, np.concatenate(Wf)))


class DescentConeSampler:
    """``sup |<g, u>|`` over the unit-sphere part of the l1 descent cone at ``x``."""

    def __init__(self, x):
        self.block = _ConeBlock(x)
        self.dim = self.block.dim

    def width_terms(self, G):
        return _cone_proj_norm([self.block], [G])

    def __call__(self, G):
        return np.maximum(self.width_terms(G), self.width_terms(-G))


class ProductConeSampler:
    """Sphere part of the product of the two descent cones at ``x`` and ``v``."""

    def __init__(self, x, v):
        self.bx = _ConeBlock(x)
        self.bv = _ConeBlock(v)
        self.dim = self.bx.dim + self.bv.dim

    def width_terms(self, G):
        g, h = G[:, : self.bx.dim], G[:, self.bx.dim:]
        return np.hypot(_cone_proj_norm([self.bx], [g]), _cone_proj_norm([self.bv], [h]))

    def __call__(self, G):
        return np.maximum(self.width_terms(G), self.width_terms(-G))


class WeightedConeSampler:
    """Sphere part of the descent cone of ``|x|_1 + lam |v|_1`` at ``(x, v)``."""

    def __init__(self, x, v, lam):
        if lam <= 0:
            raise DomainError("lam must be positive")
        self.bx = _ConeBlock(x, 1.0)
        self.bv = _ConeBlock(v, lam)
        self.dim = self.bx.dim + self.bv.dim

    def width_terms(self, G):
        g, h = G[:, : self.bx.dim], G[:, self.bx.dim:]
        return _cone_proj_norm([self.bx, self.bv], [g, h])

    def __call__(self, G):
        return np.maximum(self.width_terms(G), self.width_terms(-G))


def sandwich_check(gamma, omega, y0_norm, gamma_se=0.0, omega_se=0.0) -> bool:
    """Check ``(omega + |y0|)/3 <= gamma <= 2 omega + |y0|`` allowing 3 SE of slack."""
    if min(gamma, omega, y0_norm) < 0:
        raise DomainError("inputs must be nonnegative")
    low_slack = 3.0 * math.hypot(gamma_se, omega_se / 3.0)
    high_slack = 3.0 * math.hypot(gamma_se, 2.0 * omega_se)
    return (omega + y0_norm) / 3.0 - low_slack <= gamma <= 2.0 * omega + y0_norm + high_slack


# --- summary -------------------------------------------------------------------


def _anchor(dim, s):
    x = np.zeros(dim)
    x[:s] = 1.0
    return x


@dataclass(frozen=True)
class GeometrySummary:
    m: int
    n: int
    s_sig: int
    s_cor: int
    eta_sig: EtaProfile
    eta_cor: EtaProfile
    width_sig_sq: float
    width_cor_sq: float
    threshold: float
    gamma_sig: float
    gamma_sig_se: float
    gamma_cor: float
    gamma_cor_se: float
    gamma_joint: float
    gamma_joint_se: float

    @property
    def omega_sig(self):
        return math.sqrt(self.width_sig_sq)

    @property
    def omega_cor(self):
        return math.sqrt(self.width_cor_sq)


def summarize_geometry(n, s_sig, m, s_cor, rng=0, N: int = 2000) -> GeometrySummary:
    """Profiles, width surrogates and Monte Carlo complexities for one sparsity pair.

    The cones only depend on support size and sign pattern up to
    permutation, so a canonical anchor with leading ones is used.
    """
    state = rng if isinstance(rng, RngState) else RngState(int(rng))
    es, ec = minimize_eta2(n, s_sig), minimize_eta2(m, s_cor)
    x, v = _anchor(n, s_sig), _anchor(m, s_cor)
    gs = estimate_gamma_mc(DescentConeSampler(x), N, state.child("gamma-sig"))
    gc = estimate_gamma_mc(DescentConeSampler(v), N, state.child("gamma-cor"))
    gj = estimate_gamma_mc(ProductConeSampler(x, v), N, state.child("gamma-joint"))
    return GeometrySummary(
        m, n, s_sig, s_cor, es, ec, es.J_min, ec.J_min, es.J_min + ec.J_min,
        gs[0], gs[1], gc[0], gc[1], gj[0], gj[1],
    )
