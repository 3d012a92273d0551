"""Empirical checks of the extended matrix deviation inequality.

For an ``m x n`` matrix ``A`` with isotropic rows and a point ``(a, b)``
the deviation is ``| |A a + sqrt(m) b| - sqrt(m) |(a, b)| |``.  The lab draws
``A = sqrt(m) Phi`` from the sensing ensembles, takes the supremum over a
finite point set and compares it with the Gaussian complexity of the set.
Finite sets only ever lower-bound suprema over continuous sets, so every
check here is one-sided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ensemble import EnsembleSpec, MatrixFamily, draw_sensing_matrix, draw_sparse
from .errors import DomainError
from .geometry import FiniteSetSampler, estimate_gamma_mc
from .numeric import RngState

__all__ = [
    "PointSet",
    "DeviationReport",
    "ChevetReport",
    "IncrementReport",
    "isotropic_matrix",
    "draw_isotropic",
    "sphere_samples",
    "sparse_cone",
    "l1_ball",
    "l1_vertices",
    "singleton",
    "point_norms",
    "deviations",
    "sup_deviation",
    "verify_deviation_bound",
    "ratio_band",
    "restricted_singular_bounds",
    "verify_chevet",
    "verify_increments",
    "psi2_scale",
    "TAIL_PROBS",
]

TAIL_PROBS = (1e-1, 1e-2)
MIN_INCREMENT_TRIALS = 1000


def _state(rng) -> RngState:
    return rng if isinstance(rng, RngState) else RngState(int(rng))


@dataclass
class PointSet:
    """Finite set of pairs ``(a, b)``, stored as row stacks ``a (k, n)`` and ``b (k, m)``."""

    a: np.ndarray
    b: np.ndarray
    family: str
    gamma_estimate: float = float("nan")
    gamma_se: float = float("nan")

    def __post_init__(self):
        self.a = np.atleast_2d(np.asarray(self.a, float))
        self.b = np.atleast_2d(np.asarray(self.b, float))
        if self.a.shape[0] != self.b.shape[0] or self.a.shape[0] == 0:
            raise DomainError("point set must be nonempty with matching a/b counts")
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise DomainError("point set entries must be finite")

    @property
    def size(self) -> int:
        return self.a.shape[0]

    @property
    def n(self) -> int:
        return self.a.shape[1]

    @property
    def m(self) -> int:
        return self.b.shape[1]

    @property
    def joint(self) -> np.ndarray:
        return np.hstack([self.a, self.b])

    @property
    def rad(self) -> float:
        return float(point_norms(self.a, self.b).max())

    def with_gamma(self, N: int = 4000, rng=0) -> "PointSet":
        """Attach a Monte Carlo estimate of ``E sup |<g, (a, b)>|``."""
        self.gamma_estimate, self.gamma_se = estimate_gamma_mc(
            FiniteSetSampler(self.joint), N, _state(rng).child("gamma", self.family, self.size))
        return self

    def union(self, other: "PointSet") -> "PointSet":
        return PointSet(np.vstack([self.a, other.a]), np.vstack([self.b, other.b]),
                        f"{self.family}+{other.family}")

    def permuted(self, perm) -> "PointSet":
        return PointSet(self.a[perm], self.b[perm], self.family, self.gamma_estimate, self.gamma_se)


def sphere_samples(rng, n: int, m: int, k: int) -> PointSet:
    """``k`` uniform points on the unit sphere of ``R^n x R^m``."""
    G = _state(rng).generator().standard_normal((k, n + m))
    G /= np.linalg.norm(G, axis=1, keepdims=True)
    return PointSet(G[:, :n], G[:, n:], "sphere")


def sparse_cone(rng, n: int, m: int, k: int, s_sig: int, s_cor: int) -> PointSet:
    """``k`` unit pairs whose ``a`` part is ``s_sig``-sparse and ``b`` part ``s_cor``-sparse.

    Sets with larger sparsities contain (in law) the smaller ones, which
    gives a nested family with growing complexity.
    """
    if s_sig + s_cor < 1:
        raise DomainError("sparse cone needs at least one free coordinate")
    st = _state(rng)
    A, B = np.zeros((k, n)), np.zeros((k, m))
    for i in range(k):
        A[i] = draw_sparse(st.child("a", i), n, s_sig).dense()
        B[i] = draw_sparse(st.child("b", i), m, s_cor).dense()
    nrm = np.sqrt(np.sum(A * A, axis=1) + np.sum(B * B, axis=1))
    nrm[nrm == 0] = 1.0
    return PointSet(A / nrm[:, None], B / nrm[:, None], "sparse-cone")


def l1_ball(rng, n: int, m: int, k: int) -> PointSet:
    """``k`` uniform points on the unit l1 sphere of ``R^{n+m}``."""
    gen = _state(rng).generator()
    E = gen.exponential(size=(k, n + m))
    P = E / E.sum(axis=1, keepdims=True) * np.where(gen.random((k, n + m)) < 0.5, -1.0, 1.0)
    return PointSet(P[:, :n], P[:, n:], "l1-ball")


def l1_vertices(n: int, m: int) -> PointSet:
    """The ``2(n + m)`` signed coordinate vectors of ``R^n x R^m``."""
    I = np.eye(n + m)
    P = np.vstack([I, -I])
    return PointSet(P[:, :n], P[:, n:], "l1-ball")


def singleton(a, b) -> PointSet:
    return PointSet(np.asarray(a, float)[None], np.asarray(b, float)[None], "singleton")


def point_norms(a, b) -> np.ndarray:
    return np.sqrt(np.sum(a * a, axis=-1) + np.sum(b * b, axis=-1))


def isotropic_matrix(phi) -> np.ndarray:
    """Rescale a sensing matrix with ``E phi_i phi_i^T = I/m`` to isotropic rows."""
    phi = np.asarray(phi, float)
    return math.sqrt(phi.shape[-2]) * phi


def draw_isotropic(rng, m: int, n: int, family="gaussian") -> np.ndarray:
    return isotropic_matrix(draw_sensing_matrix(rng, EnsembleSpec(m, n, MatrixFamily.parse(family))))


def _images(A, T: PointSet):
    """``|A a + sqrt(m) b|`` and ``sqrt(m) |(a, b)|`` per point.

    Both sides go through the same summation so b-only points give an
    exactly zero deviation.  ``einsum`` keeps each entry's reduction order
    independent of the other points, so values do not depend on the set.
    """
    A = np.asarray(A, float)
    m, n = A.shape[-2:]
    if (n, m) != (T.n, T.m):
        raise DomainError(f"A is {m}x{n} but points live in R^{T.n} x R^{T.m}")
    sm = math.sqrt(m)
    W = T.b + np.einsum("...mn,kn->...km", A, T.a, optimize=False) / sm
    lhs = sm * np.sqrt(np.sum(W * W, axis=-1))
    rhs = sm * point_norms(T.a, T.b)
    return lhs, rhs


def deviations(A, T: PointSet) -> np.ndarray:
    """Per-point deviations; ``A`` may carry leading batch axes."""
    lhs, rhs = _images(A, T)
    return np.abs(lhs - rhs)


def sup_deviation(A, T: PointSet):
    """Largest deviation over ``T`` (one value per matrix if ``A`` is stacked)."""
    d = deviations(A, T).max(axis=-1)
    return float(d) if np.ndim(d) == 0 else d


@dataclass
class DeviationReport:
    family: str
    ensemble: str
    size: int
    m: int
    n: int
    sup_devs: np.ndarray = field(repr=False)
    gamma_estimate: float
    gamma_se: float
    rad: float
    K: float = 1.0

    @property
    def mean(self) -> float:
        return float(np.mean(self.sup_devs))

    @property
    def max(self) -> float:
        return float(np.max(self.sup_devs))

    @property
    def ratio(self) -> float:
        """Fitted constant: mean deviation over ``K^2 gamma``."""
        return self.mean / (self.K**2 * self.gamma_estimate)

    def singular_bracket(self, C=None):
        """``sqrt(m) -/+ C K^2 gamma`` with ``C`` defaulting to the fitted ratio."""
        C = self.ratio if C is None else C
        w = C * self.K**2 * self.gamma_estimate
        return math.sqrt(self.m) - w, math.sqrt(self.m) + w

    def rows(self):
        for t, d in enumerate(self.sup_devs):
            yield (self.family, self.size, t, float(d), self.gamma_estimate,
                   float(d) / (self.K**2 * self.gamma_estimate))


def verify_deviation_bound(sets: Sequence[PointSet], trials: int, rng, ensemble="gaussian",
                           K: float = 1.0, N: int = 4000) -> list:
    """Sup deviations of each set over ``trials`` fresh isotropic matrices.

    Matrices are shared across sets within a trial (common random numbers),
    so ratios compare sets rather than draws.
    """
    if trials < 30:
        raise DomainError("need at least 30 trials")
    st = _state(rng)
    sets = list(sets)
    m, n = sets[0].m, sets[0].n
    sups = np.empty((len(sets), trials))
    for t in range(trials):
        A = draw_isotropic(st.child("A", ensemble, t), m, n, ensemble)
        for i, T in enumerate(sets):
            sups[i, t] = sup_deviation(A, T)
    out = []
    for i, T in enumerate(sets):
        if not np.isfinite(T.gamma_estimate):
            T.with_gamma(N, st.child("gamma", i))
        out.append(DeviationReport(T.family, str(ensemble), T.size, m, n, sups[i], T.gamma_estimate,
                                   T.gamma_se, T.rad, K))
    return out


def ratio_band(reports) -> float:
    """Spread ``max / min`` of fitted constants across reports."""
    r = [rep.ratio for rep in reports]
    return max(r) / min(r)


def restricted_singular_bounds(A, T: PointSet, K: float = 1.0, C: float = 1.0, gamma=None):
    """Predicted bracket ``sqrt(m) -/+ C K^2 gamma`` and measured extremes over ``T``.

    Returns ``(lower, upper, measured_min, measured_max, violated)``.
    Points must lie on the unit sphere.
    """
    if not np.allclose(point_norms(T.a, T.b), 1.0, atol=1e-9):
        raise DomainError("restricted singular values need unit-norm points")
    g = T.gamma_estimate if gamma is None else gamma
    lhs, _ = _images(A, T)
    m = np.asarray(A).shape[-2]
    lo, hi = math.sqrt(m) - C * K * K * g, math.sqrt(m) + C * K * K * g
    mn, mx = float(lhs.min()), float(lhs.max())
    return lo, hi, mn, mx, bool(mn < lo or mx > hi)


@dataclass
class ChevetReport:
    sups: np.ndarray = field(repr=False)
    w_norm: float = 0.0
    gamma_estimate: float = float("nan")
    rad: float = 0.0

    @property
    def ratios(self) -> np.ndarray:
        return self.sups / (self.w_norm * self.gamma_estimate)

    @property
    def band(self) -> float:
        r = self.ratios
        return float(r.max() / r.min())


def chevet_sup(A, w, U) -> np.ndarray:
    """``max_u <A u, w>`` over the rows of ``U``; ``A`` may be stacked."""
    Aw = np.einsum("...mn,m->...n", np.asarray(A, float), np.asarray(w, float))
    return (Aw @ np.atleast_2d(U).T).max(axis=-1)


def verify_chevet(w, U, trials: int, rng, ensemble="gaussian", N: int = 4000) -> ChevetReport:
    """Per-trial ``sup_{u in U} <A u, w>`` for isotropic ``A`` with ``U`` a finite set in ``R^n``."""
    w = np.asarray(w, float)
    U = np.atleast_2d(np.asarray(U, float))
    if not np.any(w):
        raise DomainError("w must be nonzero")
    st = _state(rng)
    m, n = w.size, U.shape[1]
    A = np.stack([draw_isotropic(st.child("A", t), m, n, ensemble) for t in range(trials)])
    sups = chevet_sup(A, w, U)
    gam, _ = estimate_gamma_mc(FiniteSetSampler(U), N, st.child("gamma"))
    return ChevetReport(sups, float(np.linalg.norm(w)), gam, float(np.linalg.norm(U, axis=1).max()))


def psi2_scale(samples, probs=TAIL_PROBS) -> float:
    """Scale ``K`` of a fitted tail ``P(|X| > t) = exp(-t^2 / K^2)``.

    Empirical quantiles ``t_p`` at tail probabilities ``p`` are fitted by
    least squares on ``log p = -t_p^2 / K^2`` (a line through the origin
    in ``t^2``).
    """
    x = np.abs(np.asarray(samples, float))
    t2 = np.array([np.quantile(x, 1.0 - p) for p in probs]) ** 2
    lp = np.log(np.asarray(probs))
    den = float(np.sum(t2 * t2))
    if den == 0.0:
        return 0.0
    inv_k2 = -float(np.sum(t2 * lp)) / den
    return 1.0 / math.sqrt(inv_k2)


@dataclass
class IncrementReport:
    scales: np.ndarray
    distances: np.ndarray

    @property
    def ratios(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.distances > 0, self.scales / self.distances, 0.0)

    @property
    def constant(self) -> float:
        """Smallest global ``C`` with every scale below ``C`` times its distance."""
        return float(self.ratios.max())

    def holds(self, C: float) -> bool:
        return bool(np.all(self.scales <= C * self.distances + 1e-12))


def verify_increments(pairs, trials: int, rng, ensemble="gaussian") -> IncrementReport:
    """Fitted tail scales of ``X_u - X_u'`` for each pair ``((a, b), (a', b'))``.

    ``X_(a,b) = |A a + sqrt(m) b| - sqrt(m) |(a, b)|`` with the same ``A``
    for both points of a trial.
    """
    if trials < MIN_INCREMENT_TRIALS:
        raise DomainError(f"tail fit needs at least {MIN_INCREMENT_TRIALS} trials")
    pairs = list(pairs)
    (a0, b0), _ = pairs[0]
    m, n = len(b0), len(a0)
    st = _state(rng)
    A = np.stack([draw_isotropic(st.child("A", t), m, n, ensemble) for t in range(trials)])
    scales, dists = [], []
    for (a, b), (a2, b2) in pairs:
        T = PointSet(np.vstack([a, a2]), np.vstack([b, b2]), "pair")
        lhs, rhs = _images(A, T)
        X = lhs - rhs
        scales.append(psi2_scale(X[:, 0] - X[:, 1]))
        dists.append(float(point_norms(T.a[0] - T.a[1], T.b[0] - T.b[1])))
    return IncrementReport(np.array(scales), np.array(dists))
