"""Numeric core: Gaussian tail integral, spectral norm, deterministic RNG.

Random streams are never global.  Every consumer holds an :class:`RngState`
and derives independent children with :meth:`RngState.child`, so each
draw is a pure function of (seed, tag path, parameters).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConvergenceError, DomainError

__all__ = [
    "RngState",
    "derive_seed",
    "gaussian_upper_tail",
    "golden_section",
    "spectral_norm",
    "std_normal_vector",
]

SQRT_HALF_PI = math.sqrt(math.pi / 2.0)
_SEED_MASK = (1 << 64) - 1


def derive_seed(parent: int, *tags) -> int:
    """Child seed = first 8 bytes (little endian) of BLAKE2b over ``parent|tag|...``."""
    text = "|".join([str(int(parent) & _SEED_MASK), *map(str, tags)])
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RngState:
    """Seed plus generator tag.

    The generator is Philox (counter based), seeded through numpy's
    ``SeedSequence``; normals come from numpy's ziggurat transform.  Both
    are platform independent, so identical seeds give identical streams.
    """

    seed: int
    algorithm: str = "philox"

    def __post_init__(self):
        if self.algorithm != "philox":
            raise DomainError(f"unsupported generator {self.algorithm!r}")
        object.__setattr__(self, "seed", int(self.seed) & _SEED_MASK)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.seed))

    def child(self, *tags) -> "RngState":
        return RngState(derive_seed(self.seed, *tags), self.algorithm)


def _as_rng(rng) -> RngState:
    if isinstance(rng, RngState):
        return rng
    return RngState(int(rng))


def gaussian_upper_tail(t):
    """Return the unnormalised tail integral of exp(-x^2/2) from ``t`` to infinity.

    Equals ``sqrt(pi/2) * erfc(t / sqrt(2))``.  Accepts scalars or arrays;
    every entry must be finite and nonnegative.
    """
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError("gaussian_upper_tail requires finite t >= 0")
    out = SQRT_HALF_PI * special.erfc(arr / math.sqrt(2.0))
    if out.ndim == 0:
        return float(out)
    return out


def _power_iteration(M, v, tol, max_iter):
    sigma = 0.0
    for k in range(1, max_iter + 1):
        w = M @ v
        new_sigma = float(np.linalg.norm(w))
        if new_sigma == 0.0:
            return 0.0, k, True
        u = M.T @ w
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return new_sigma, k, True
        v = u / nu
        if abs(new_sigma - sigma) <= tol * new_sigma:
            return new_sigma, k, False
        sigma = new_sigma
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations",
        estimate=sigma,
        iterations=max_iter,
    )


def spectral_norm(M, tol: float = 1e-8, max_iter: int = 5000) -> float:
    """Largest singular value of ``M`` by power iteration on ``M^T M``.

    Starts from the normalised all-ones vector.  If that start lands in the
    null space (the estimate collapses to zero) one retry is made from a
    fixed perturbed start.  Raises :class:`ConvergenceError` carrying the
    last estimate when ``max_iter`` is exhausted.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if tol <= 0:
        raise DomainError("tol must be positive")
    if not np.all(np.isfinite(M)):
        raise DomainError("matrix has non-finite entries")
    if not np.any(M):
        raise DomainError("spectral_norm of the zero matrix is not supported")
    n = M.shape[1]
    v = np.ones(n) / math.sqrt(n)
    sigma, _, stalled = _power_iteration(M, v, tol, max_iter)
    if stalled:
        v = 1.0 + np.sin(np.arange(1, n + 1))
        v /= np.linalg.norm(v)
        sigma, _, _ = _power_iteration(M, v, tol, max_iter)
    return sigma


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo: float, hi: float, tol: float = 1e-6):
    """Minimise a unimodal scalar ``f`` on ``[lo, hi]`` by golden-section search.

    Stops once the bracket is narrower than ``tol``; the endpoints are
    compared at the end so minima sitting on the boundary are returned
    exactly.  Returns ``(t, f(t))``.
    """
    if not hi >= lo:
        raise DomainError("empty search interval")
    a, b = float(lo), float(hi)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    t = 0.5 * (a + b)
    best = (t, f(t))
    for end in (float(lo), float(hi)):
        fe = f(end)
        if fe <= best[1]:
            best = (end, fe)
    return best


def std_normal_vector(rng, n: int) -> np.ndarray:
    """``n`` i.i.d. standard normal entries drawn from ``rng``'s stream."""
    if n < 1:
        raise DomainError("n must be >= 1")
    return _as_rng(rng).generator().standard_normal(int(n))
