"""Random instances of the corrupted observation model ``y = Phi x + v + z``.

Every draw is a pure function of an :class:`~corrsense.numeric.RngState`.
``assemble`` splits its state into independent children tagged ``"phi"``,
``"x"``, ``"v"`` and ``"z"``, so changing one component's law leaves the
others' streams untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigurationError, DomainError
from .numeric import RngState

__all__ = [
    "MatrixFamily",
    "NoiseSpec",
    "EnsembleSpec",
    "SparseSignal",
    "ProblemInstance",
    "draw_sensing_matrix",
    "draw_sparse",
    "draw_noise",
    "assemble",
    "make_instance",
    "relative_error",
    "joint_error",
    "save_instance",
    "load_instance",
    "format_instance",
    "parse_instance",
]


class MatrixFamily(str, Enum):
    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"

    @classmethod
    def parse(cls, tag) -> "MatrixFamily":
        if isinstance(tag, cls):
            return tag
        try:
            return cls(str(tag).strip().lower())
        except ValueError:
            raise ConfigurationError(f"unknown matrix family {tag!r}", key="family") from None


@dataclass(frozen=True)
class NoiseSpec:
    """Noise law.

    ``kind`` is ``"none"``, ``"bounded"`` (Gaussian direction rescaled to
    norm ``delta``) or ``"subgaussian"`` (i.i.d. unit-variance entries times
    ``scale``, drawn from ``law`` = ``"normal"`` or ``"bernoulli"``; ``L`` is
    the recorded sub-Gaussian norm used by parameter rules).
    """

    kind: str = "none"
    delta: float = 0.0
    L: float = 1.0
    law: str = "normal"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "bounded", "subgaussian"):
            raise ConfigurationError(f"unknown noise family {self.kind!r}", key="noise")
        if not self.delta >= 0:
            raise DomainError("delta must be >= 0")
        if self.kind == "subgaussian":
            if not self.L > 0:
                raise DomainError("sub-Gaussian noise needs L > 0")
            if self.law not in ("normal", "bernoulli"):
                raise ConfigurationError(f"unknown noise law {self.law!r}", key="law")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def bounded(cls, delta):
        return cls("bounded", delta=float(delta))

    @classmethod
    def subgaussian(cls, L=1.0, law="normal", scale=1.0):
        return cls("subgaussian", L=float(L), law=law, scale=float(scale))

    def nominal_delta(self, m: int) -> float:
        """Radius handed to the constrained programs for this noise law."""
        if self.kind == "bounded":
            return self.delta
        if self.kind == "subgaussian":
            return self.scale * math.sqrt(m)
        return 0.0


@dataclass(frozen=True)
class EnsembleSpec:
    m: int
    n: int
    family: MatrixFamily = MatrixFamily.GAUSSIAN
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    K: float = 1.0  # sub-Gaussian norm of the rows, metadata only

    def __post_init__(self):
        object.__setattr__(self, "family", MatrixFamily.parse(self.family))
        if int(self.m) < 1 or int(self.n) < 1:
            raise DomainError("m and n must be >= 1")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "n", int(self.n))


@dataclass(frozen=True, eq=False)
class SparseSignal:
    dim: int
    support: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        sup = np.asarray(self.support, dtype=np.int64)
        val = np.asarray(self.values, dtype=float)
        if sup.shape != val.shape or sup.ndim != 1:
            raise DomainError("support and values must be matching 1-D arrays")
        if sup.size and (sup.min() < 0 or sup.max() >= self.dim):
            raise DomainError("support index out of bounds")
        if np.unique(sup).size != sup.size:
            raise DomainError("support indices must be distinct")
        order = np.argsort(sup, kind="stable")
        object.__setattr__(self, "support", sup[order])
        object.__setattr__(self, "values", val[order])

    @property
    def sparsity(self) -> int:
        return int(self.support.size)

    def dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.support] = self.values
        return out

    @classmethod
    def from_dense(cls, u) -> "SparseSignal":
        u = np.asarray(u, dtype=float)
        idx = np.flatnonzero(u)
        return cls(u.size, idx, u[idx])


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    phi: np.ndarray
    x_true: SparseSignal
    v_true: SparseSignal
    z: np.ndarray
    y: np.ndarray
    delta: float
    spec: EnsembleSpec
    seed: int = 0

    @property
    def m(self) -> int:
        return self.phi.shape[0]

    @property
    def n(self) -> int:
        return self.phi.shape[1]

    @property
    def x(self) -> np.ndarray:
        return self.x_true.dense()

    @property
    def v(self) -> np.ndarray:
        return self.v_true.dense()

    @property
    def kappa_f(self) -> float:
        return float(np.abs(self.x_true.values).sum())

    @property
    def kappa_g(self) -> float:
        return float(np.abs(self.v_true.values).sum())


def _rng(rng) -> RngState:
    return rng if isinstance(rng, RngState) else RngState(int(rng))


def draw_sensing_matrix(rng, spec: EnsembleSpec) -> np.ndarray:
    """Gaussian ``N(0, 1/m)`` entries or symmetric signs scaled by ``1/sqrt(m)``."""
    gen = _rng(rng).generator()
    m, n = spec.m, spec.n
    fam = MatrixFamily.parse(spec.family)
    if fam is MatrixFamily.GAUSSIAN:
        return gen.standard_normal((m, n)) / math.sqrt(m)
    signs = 2.0 * gen.integers(0, 2, size=(m, n)) - 1.0
    return signs / math.sqrt(m)


def draw_sparse(rng, dim: int, s: int) -> SparseSignal:
    """Uniform ``s``-subset support (partial Fisher-Yates) with N(0,1) values."""
    if dim < 1:
        raise DomainError("dim must be >= 1")
    if s < 0 or s > dim:
        raise DomainError(f"sparsity {s} outside [0, {dim}]")
    gen = _rng(rng).generator()
    perm = np.arange(dim)
    for i in range(s):
        j = int(gen.integers(i, dim))
        perm[i], perm[j] = perm[j], perm[i]
    values = gen.standard_normal(s)
    return SparseSignal(dim, perm[:s].copy(), values)


def draw_noise(rng, m: int, noise: NoiseSpec) -> np.ndarray:
    if noise.kind == "none":
        return np.zeros(m)
    gen = _rng(rng).generator()
    if noise.kind == "bounded":
        if noise.delta == 0:
            return np.zeros(m)
        g = gen.standard_normal(m)
        return g * (noise.delta / np.linalg.norm(g))
    if noise.law == "bernoulli":
        e = 2.0 * gen.integers(0, 2, size=m) - 1.0
    else:
        e = gen.standard_normal(m)
    return noise.scale * e


def assemble(rng, spec: EnsembleSpec, s_sig: int, s_cor: int) -> ProblemInstance:
    state = _rng(rng)
    phi = draw_sensing_matrix(state.child("phi"), spec)
    xs = draw_sparse(state.child("x"), spec.n, s_sig)
    vs = draw_sparse(state.child("v"), spec.m, s_cor)
    z = draw_noise(state.child("z"), spec.m, spec.noise)
    y = phi @ xs.dense() + vs.dense() + z
    return ProblemInstance(phi, xs, vs, z, y, spec.noise.nominal_delta(spec.m), spec, state.seed)


def make_instance(phi, y, delta=0.0, x_true=None, v_true=None, z=None, family="gaussian"):
    """Wrap explicit data as a :class:`ProblemInstance` (missing truth is zero)."""
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    m, n = phi.shape
    y = np.asarray(y, dtype=float).reshape(m)
    x = np.zeros(n) if x_true is None else np.asarray(x_true, dtype=float)
    v = np.zeros(m) if v_true is None else np.asarray(v_true, dtype=float)
    z = np.zeros(m) if z is None else np.asarray(z, dtype=float)
    spec = EnsembleSpec(m, n, family, NoiseSpec.bounded(delta) if delta > 0 else NoiseSpec.none())
    return ProblemInstance(phi, SparseSignal.from_dense(x), SparseSignal.from_dense(v), z, y, float(delta), spec)


def relative_error(x_hat, x_true):
    """``||x_hat - x_true|| / ||x_true||`` along the last axis.

    Zero when both are zero, infinite when only ``x_true`` is zero.
    """
    a = np.asarray(x_hat, dtype=float)
    b = np.asarray(x_true, dtype=float)
    if a.shape != b.shape:
        raise DomainError(f"shape mismatch {a.shape} vs {b.shape}")
    num = np.linalg.norm(a - b, axis=-1)
    den = np.linalg.norm(b, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
    return float(out) if out.ndim == 0 else out


def joint_error(x_hat, v_hat, x_true, v_true):
    """``sqrt(||x_hat - x_true||^2 + ||v_hat - v_true||^2)`` along the last axis."""
    pairs = [(np.asarray(x_hat, float), np.asarray(x_true, float)),
             (np.asarray(v_hat, float), np.asarray(v_true, float))]
    for a, b in pairs:
        if a.shape != b.shape:
            raise DomainError(f"shape mismatch {a.shape} vs {b.shape}")
    sq = sum(np.sum((a - b) ** 2, axis=-1) for a, b in pairs)
    out = np.sqrt(sq)
    return float(out) if np.ndim(out) == 0 else out


# --- text serialization -------------------------------------------------

_HEADER_KEYS = ("m", "n", "delta", "family", "noise", "L", "law", "scale", "K", "seed")


def _row(vec) -> str:
    return " ".join(repr(float(v)) for v in vec)


def format_instance(P: ProblemInstance) -> str:
    nz = P.spec.noise
    lines = [
        f"m={P.m}",
        f"n={P.n}",
        f"delta={P.delta!r}",
        f"family={P.spec.family.value}",
        f"noise={nz.kind}",
        f"L={nz.L!r}",
        f"law={nz.law}",
        f"scale={nz.scale!r}",
        f"K={P.spec.K!r}",
        f"seed={P.seed}",
    ]
    lines += [_row(r) for r in P.phi]
    lines += [_row(P.x), _row(P.v), _row(P.z), _row(P.y)]
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> ProblemInstance:
    header = {}
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            key, _, val = (p.strip() for p in line.partition("="))
            if key not in _HEADER_KEYS:
                raise ConfigurationError("unknown header", key=key, line=lineno)
            header[key] = (val, lineno)
            continue
        try:
            rows.append(np.array([float(t) for t in line.split()]))
        except ValueError:
            raise ConfigurationError("non-numeric entry", line=lineno) from None
    for key in ("m", "n", "delta", "family"):
        if key not in header:
            raise ConfigurationError("missing header", key=key)

    def get(key, conv, default=None):
        if key not in header:
            return default
        val, lineno = header[key]
        try:
            return conv(val)
        except ValueError:
            raise ConfigurationError(f"bad value {val!r}", key=key, line=lineno) from None

    m, n = get("m", int), get("n", int)
    delta = get("delta", float)
    if len(rows) != m + 4:
        raise ConfigurationError(f"expected {m + 4} data lines, found {len(rows)}")
    expected = [n] * m + [n, m, m, m]
    for i, (r, k) in enumerate(zip(rows, expected)):
        if r.size != k:
            raise ConfigurationError(f"data line {i + 1} has {r.size} entries, expected {k}")
    kind = get("noise", str, "bounded" if delta > 0 else "none")
    noise = NoiseSpec(kind, delta=delta if kind == "bounded" else 0.0, L=get("L", float, 1.0),
                      law=get("law", str, "normal"), scale=get("scale", float, 1.0))
    spec = EnsembleSpec(m, n, get("family", str), noise, K=get("K", float, 1.0))
    phi = np.vstack(rows[:m])
    x, v, z, y = rows[m:]
    return ProblemInstance(phi, SparseSignal.from_dense(x), SparseSignal.from_dense(v), z, y,
                           delta, spec, get("seed", int, 0))


def save_instance(P: ProblemInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_instance(P))


def load_instance(path) -> ProblemInstance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())
