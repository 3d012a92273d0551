"""Experiment orchestration: phase-transition grids and noise sweeps.

Every trial draws its instance from a seed derived from the base seed and
the cell coordinates, so cells can be run in any order, in parallel, or
re-run individually and still give the same numbers.
"""

from __future__ import annotations

import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .ensemble import EnsembleSpec, MatrixFamily, NoiseSpec, assemble
from .errors import ConfigurationError, DomainError
from .geometry import threshold_polyline, width_surrogate
from .numeric import RngState
from .regularization import NOISELESS_TAU, Regime, Strategy, select_lambda, select_tau
from .solvers import Procedure, SolveConfig, solve_batch

log = logging.getLogger(__name__)

SUCCESS_TOL = 1e-3
GRID_HEADER = "s_sig,s_cor,successes,trials,mean_error"
SWEEP_HEADER = "delta,procedure,policy,mean_error,std_error"


class Policy(str, Enum):
    """How the regularization parameters of a solve are chosen."""

    EXACT_KAPPA = "exact-kappa"
    LAMBDA_STAR = "lambda-star"
    LAMBDA_ONE = "lambda-one"
    TAU_TINY = "tau-tiny"
    TAU_RULE = "tau-rule"

    @classmethod
    def parse(cls, tag, key="policy", line=None) -> "Policy":
        if isinstance(tag, cls):
            return tag
        try:
            return cls(str(tag).strip().lower())
        except ValueError:
            raise ConfigurationError(f"unknown policy {tag!r}", key=key, line=line) from None


_ALLOWED = {
    Procedure.CONSTRAINED_SIGNAL: {Policy.EXACT_KAPPA},
    Procedure.CONSTRAINED_CORRUPTION: {Policy.EXACT_KAPPA},
    Procedure.PARTIALLY_PENALIZED: {Policy.LAMBDA_STAR, Policy.LAMBDA_ONE},
    Procedure.FULLY_PENALIZED: {Policy.TAU_TINY, Policy.TAU_RULE, Policy.LAMBDA_ONE},
}
DEFAULT_POLICY = {
    Procedure.CONSTRAINED_SIGNAL: Policy.EXACT_KAPPA,
    Procedure.CONSTRAINED_CORRUPTION: Policy.EXACT_KAPPA,
    Procedure.PARTIALLY_PENALIZED: Policy.LAMBDA_STAR,
    Procedure.FULLY_PENALIZED: Policy.TAU_TINY,
}
# the (procedure, policy) rows of a noise sweep
SWEEP_POLICIES = (
    (Procedure.CONSTRAINED_CORRUPTION, Policy.EXACT_KAPPA),
    (Procedure.PARTIALLY_PENALIZED, Policy.LAMBDA_STAR),
    (Procedure.PARTIALLY_PENALIZED, Policy.LAMBDA_ONE),
    (Procedure.FULLY_PENALIZED, Policy.TAU_RULE),
    (Procedure.FULLY_PENALIZED, Policy.LAMBDA_ONE),
)


def check_policy(procedure, policy):
    procedure, policy = Procedure.parse(procedure), Policy.parse(policy)
    if policy not in _ALLOWED[procedure]:
        raise ConfigurationError(f"policy {policy.value} does not apply to {procedure.value}", key="policy")
    return procedure, policy


def solve_config(procedure, policy, *, m, n, s_sig, s_cor, delta=0.0, tol=1e-6, max_iter=4000,
                 beta=2.0, C=0.5, K=1.0) -> SolveConfig:
    """Solver settings for one cell under ``policy``.

    ``lambda-one`` on the fully penalized program means ``tau1 = tau2 = 1``.
    ``tau-rule`` takes the bounded-noise lower bounds with ``sqrt(dim)`` ball
    complexity, which for ``m = n`` and ``C K = 1/2, beta = 2`` is
    ``tau1 = tau2 = 2 delta``; at ``delta = 0`` it falls back to the
    noiseless value.
    """
    procedure, policy = check_policy(procedure, policy)
    kw = dict(tol=tol, max_iter=max_iter, record_history=False)
    if policy is Policy.EXACT_KAPPA:
        return SolveConfig(procedure, **kw)
    if procedure is Procedure.PARTIALLY_PENALIZED:
        lam = 1.0 if policy is Policy.LAMBDA_ONE else select_lambda(n, s_sig, m, s_cor).lambda_star
        return SolveConfig(procedure, lam=lam, **kw)
    if policy is Policy.LAMBDA_ONE:
        t1 = t2 = 1.0
    elif policy is Policy.TAU_TINY or delta == 0:
        t1 = t2 = NOISELESS_TAU
    else:
        sel = select_tau(Strategy.MIN_ERROR, Regime.BOUNDED, n=n, m=m, s_sig=s_sig, s_cor=s_cor,
                         beta=beta, delta=delta, K=K, C=C, gamma_method="sqrt-dim")
        t1, t2 = sel.tau1, sel.tau2
    return SolveConfig(procedure, tau1=t1, tau2=t2, **kw)


def is_success(x_hat, x_true, tol=SUCCESS_TOL) -> bool:
    """Relative signal error within ``tol``; a zero signal needs ``|x_hat| <= tol``."""
    den = float(np.linalg.norm(x_true))
    num = float(np.linalg.norm(np.asarray(x_hat) - x_true))
    return num <= tol * den if den > 0 else num <= tol


def _parse_range(text, key, line=None):
    try:
        parts = [int(p) for p in str(text).split(":")]
    except ValueError:
        raise ConfigurationError(f"bad range {text!r}, expected lo:hi:stride", key=key, line=line) from None
    if len(parts) == 2:
        parts.append(1)
    if len(parts) != 3:
        raise ConfigurationError(f"bad range {text!r}, expected lo:hi:stride", key=key, line=line)
    return tuple(parts)


@dataclass(frozen=True)
class GridSpec:
    """A phase-transition grid over ``(s_sig, s_cor)``.

    Ranges are inclusive ``(lo, hi, stride)`` triples.
    """

    m: int = 64
    n: int = 64
    sig_range: tuple = (0, 64, 4)
    cor_range: tuple = (0, 64, 4)
    trials: int = 20
    procedure: Procedure = Procedure.CONSTRAINED_CORRUPTION
    policy: Optional[Policy] = None
    family: MatrixFamily = MatrixFamily.GAUSSIAN
    seed: int = 0
    tol: float = 1e-6
    max_iter: int = 4000

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)
        set_("procedure", Procedure.parse(self.procedure))
        set_("policy", DEFAULT_POLICY[self.procedure] if self.policy is None else Policy.parse(self.policy))
        check_policy(self.procedure, self.policy)
        set_("family", MatrixFamily.parse(self.family))
        set_("sig_range", tuple(int(v) for v in self.sig_range))
        set_("cor_range", tuple(int(v) for v in self.cor_range))
        if self.m < 1 or self.n < 1:
            raise ConfigurationError("m and n must be >= 1", key="m" if self.m < 1 else "n")
        for key, (lo, hi, stride), dim in (("sig_range", self.sig_range, self.n),
                                           ("cor_range", self.cor_range, self.m)):
            if stride < 1 or lo < 0 or hi > dim or lo > hi:
                raise ConfigurationError(f"range {lo}:{hi}:{stride} must satisfy 0 <= lo <= hi <= {dim}, "
                                         f"stride >= 1", key=key)
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1", key="trials")
        if not self.tol > 0 or self.max_iter < 1:
            raise ConfigurationError("tol must be > 0 and max_iter >= 1", key="tol")

    @property
    def sig_values(self):
        lo, hi, st = self.sig_range
        return list(range(lo, hi + 1, st))

    @property
    def cor_values(self):
        lo, hi, st = self.cor_range
        return list(range(lo, hi + 1, st))

    def cells(self):
        return [(a, b) for a in self.sig_values for b in self.cor_values]


@dataclass(frozen=True)
class SweepSpec:
    """A stable-recovery sweep over bounded noise levels."""

    m: int = 128
    n: int = 128
    s_sig: int = 20
    s_cor: int = 20
    deltas: tuple = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0)
    trials: int = 20
    policies: tuple = SWEEP_POLICIES
    family: MatrixFamily = MatrixFamily.GAUSSIAN
    seed: int = 0
    tol: float = 1e-7
    max_iter: int = 20000

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)
        set_("family", MatrixFamily.parse(self.family))
        set_("deltas", tuple(float(d) for d in self.deltas))
        set_("policies", tuple(check_policy(p, q) for p, q in self.policies))
        if self.m < 1 or self.n < 1:
            raise ConfigurationError("m and n must be >= 1", key="m")
        if not (0 <= self.s_sig <= self.n and 0 <= self.s_cor <= self.m):
            raise ConfigurationError("sparsity outside [0, dim]", key="s_sig")
        if not self.deltas or any(not (d >= 0 and math.isfinite(d)) for d in self.deltas):
            raise ConfigurationError("noise levels must be finite and >= 0", key="deltas")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1", key="trials")
        if not self.policies:
            raise ConfigurationError("no policies selected", key="policies")


@dataclass
class CellResult:
    s_sig: int
    s_cor: int
    successes: int
    trials: int
    mean_error: float
    nonconverged: int = 0


@dataclass
class PhaseGridResult:
    spec: GridSpec
    cells: list
    threshold: np.ndarray = field(repr=False)

    @property
    def nonconverged(self) -> int:
        return sum(c.nonconverged for c in self.cells)

    @property
    def total_successes(self) -> int:
        return sum(c.successes for c in self.cells)

    def rates(self) -> np.ndarray:
        """Success rates as a ``(len(sig_values), len(cor_values))`` array."""
        R = np.array([c.successes / c.trials for c in self.cells])
        return R.reshape(len(self.spec.sig_values), len(self.spec.cor_values))


@dataclass
class SweepRow:
    delta: float
    procedure: Procedure
    policy: Policy
    mean_error: float
    std_error: float
    nonconverged: int = 0


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list

    @property
    def nonconverged(self) -> int:
        return sum(r.nonconverged for r in self.rows)

    def series(self, procedure, policy):
        procedure, policy = Procedure.parse(procedure), Policy.parse(policy)
        sel = [r for r in self.rows if r.procedure is procedure and r.policy is policy]
        return np.array([r.delta for r in sel]), np.array([r.mean_error for r in sel])


def linear_fit(x, y):
    """Least-squares line ``y = a x + b``; returns ``(a, b, r_squared)``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    a, b = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (a * x + b)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return float(a), float(b), 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


# --- execution -------------------------------------------------------------

def _cell_instances(spec: GridSpec, s_sig, s_cor):
    root = RngState(spec.seed)
    ens = EnsembleSpec(spec.m, spec.n, spec.family)
    return [assemble(root.child("cell", s_sig, s_cor, t), ens, s_sig, s_cor) for t in range(spec.trials)]


def run_cell(spec: GridSpec, s_sig: int, s_cor: int) -> CellResult:
    """All trials of one grid cell, solved as a batch."""
    insts = _cell_instances(spec, s_sig, s_cor)
    cfg = solve_config(spec.procedure, spec.policy, m=spec.m, n=spec.n, s_sig=s_sig, s_cor=s_cor,
                       tol=spec.tol, max_iter=spec.max_iter)
    reps = solve_batch(insts, cfg)
    ok = [r.converged and is_success(r.x_hat, P.x) for r, P in zip(reps, insts)]
    bad = sum(not r.converged for r in reps)
    if bad:
        log.info("cell (%d, %d): %d of %d solves hit max_iter", s_sig, s_cor, bad, len(reps))
    err = float(np.mean([r.joint_error for r in reps]))
    return CellResult(s_sig, s_cor, int(sum(ok)), spec.trials, err, bad)


def _cell_task(args):
    spec, s_sig, s_cor = args
    with threadpool_limits(1):
        return run_cell(spec, s_sig, s_cor)


def _map(fn, tasks, threads):
    """Ordered map, optionally across worker processes."""
    if threads is None or threads <= 1 or len(tasks) <= 1:
        with threadpool_limits(1):
            return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(threads, len(tasks))) as ex:
        return list(ex.map(fn, tasks, chunksize=1))


def run_phase_grid(spec: GridSpec, threads: int = 1) -> PhaseGridResult:
    """Success counts per cell (relative signal error <= 1e-3, converged solves only)."""
    cells = _map(_cell_task, [(spec, a, b) for a, b in spec.cells()], threads)
    return PhaseGridResult(spec, cells, threshold_polyline(spec.m, spec.n))


def _sweep_task(args):
    spec, delta = args
    with threadpool_limits(1):
        return _sweep_delta(spec, delta)


def _sweep_delta(spec: SweepSpec, delta: float):
    root = RngState(spec.seed)
    ens = EnsembleSpec(spec.m, spec.n, spec.family, NoiseSpec.bounded(delta) if delta > 0 else NoiseSpec.none())
    # the trial seed ignores delta, so every level sees the same matrices,
    # signals and noise direction
    insts = [assemble(root.child("trial", t), ens, spec.s_sig, spec.s_cor) for t in range(spec.trials)]
    rows = []
    for proc, pol in spec.policies:
        cfg = solve_config(proc, pol, m=spec.m, n=spec.n, s_sig=spec.s_sig, s_cor=spec.s_cor,
                           delta=delta, tol=spec.tol, max_iter=spec.max_iter)
        reps = solve_batch(insts, cfg)
        errs = np.array([r.joint_error for r in reps])
        bad = sum(not r.converged for r in reps)
        if bad:
            log.info("delta %g %s/%s: %d solves hit max_iter", delta, proc.value, pol.value, bad)
        sd = float(errs.std(ddof=1)) if errs.size > 1 else 0.0
        rows.append(SweepRow(delta, proc, pol, float(errs.mean()), sd, bad))
    return rows


def run_stable_sweep(spec: SweepSpec, threads: int = 1) -> SweepResult:
    """Mean and spread of the joint error per noise level and policy."""
    per = _map(_sweep_task, [(spec, d) for d in spec.deltas], threads)
    return SweepResult(spec, [r for rows in per for r in rows])


# --- contours --------------------------------------------------------------

def _crossings(vals, rates, level):
    out = []
    for i in range(len(vals) - 1):
        r0, r1 = rates[i], rates[i + 1]
        if (r0 >= level) != (r1 >= level):
            out.append(vals[i] + (level - r0) / (r1 - r0) * (vals[i + 1] - vals[i]))
    return out


def success_contour(result: PhaseGridResult, level: float = 0.5) -> np.ndarray:
    """Interpolated ``level`` crossings along every row and column of the grid.

    Returns ``(s_sig, s_cor)`` points; rows or columns that never cross
    contribute nothing (their transition lies outside the grid).
    """
    R = result.rates()
    sig, cor = result.spec.sig_values, result.spec.cor_values
    pts = []
    for i, s in enumerate(sig):
        pts += [(float(s), c) for c in _crossings(cor, R[i], level)]
    for j, c in enumerate(cor):
        pts += [(s, float(c)) for s in _crossings(sig, R[:, j], level)]
    return np.array(pts, float).reshape(-1, 2)


def _densify(poly, step=0.05):
    out = [poly[:1]]
    for p, q in zip(poly[:-1], poly[1:]):
        k = max(1, int(math.ceil(np.abs(q - p).max() / step)))
        out.append(p + (q - p) * (np.arange(1, k + 1)[:, None] / k))
    return np.vstack(out)


def contour_agreement(points, polyline, tol) -> np.ndarray:
    """Per point: whether its sup-norm distance to ``polyline`` is at most ``tol``."""
    points = np.atleast_2d(points)
    if points.size == 0:
        return np.zeros(0, bool)
    dense = _densify(np.asarray(polyline, float))
    d = np.abs(points[:, None, :] - dense[None, :, :]).max(axis=2).min(axis=1)
    return d <= tol + 1e-9


def contour_distance(a: PhaseGridResult, b: PhaseGridResult, level: float = 0.5) -> np.ndarray:
    """Per shared row/column, the gap between the ``level`` crossings of two grids.

    Only rows and columns where both grids cross exactly once are compared.
    """
    Ra, Rb = a.rates(), b.rates()
    sig, cor = a.spec.sig_values, a.spec.cor_values
    gaps = []
    for i in range(len(sig)):
        ca, cb = _crossings(cor, Ra[i], level), _crossings(cor, Rb[i], level)
        if len(ca) == 1 and len(cb) == 1:
            gaps.append(abs(ca[0] - cb[0]))
    for j in range(len(cor)):
        ca, cb = _crossings(sig, Ra[:, j], level), _crossings(sig, Rb[:, j], level)
        if len(ca) == 1 and len(cb) == 1:
            gaps.append(abs(ca[0] - cb[0]))
    return np.array(gaps)


def total_width(m, n, s_sig, s_cor) -> float:
    return width_surrogate(n, s_sig) + width_surrogate(m, s_cor)


# --- CSV -------------------------------------------------------------------

def _fmt(x) -> str:
    return repr(float(x))


def grid_csv(result: PhaseGridResult) -> str:
    buf = io.StringIO()
    buf.write(GRID_HEADER + "\n")
    for c in result.cells:
        buf.write(f"{c.s_sig},{c.s_cor},{c.successes},{c.trials},{_fmt(c.mean_error)}\n")
    buf.write(f"# nonconverged={result.nonconverged}\n")
    return buf.getvalue()


def sweep_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    buf.write(SWEEP_HEADER + "\n")
    for r in result.rows:
        buf.write(f"{_fmt(r.delta)},{r.procedure.value},{r.policy.value},"
                  f"{_fmt(r.mean_error)},{_fmt(r.std_error)}\n")
    buf.write(f"# nonconverged={result.nonconverged}\n")
    return buf.getvalue()


def emit_csv(result, path=None) -> str:
    """Write a grid or sweep result as CSV; returns the text.  ``path=None`` only formats."""
    text = grid_csv(result) if isinstance(result, PhaseGridResult) else sweep_csv(result)
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


# --- config files ------------------------------------------------------------

_GRID_KEYS = {f.name for f in fields(GridSpec)}
_SWEEP_KEYS = {f.name for f in fields(SweepSpec)}


def _read_pairs(text):
    pairs = {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"expected 'key = value', got {raw.strip()!r}", line=no)
        key, val = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ConfigurationError("empty key", line=no)
        if key in pairs:
            raise ConfigurationError("duplicate key", key=key, line=no)
        pairs[key] = (val, no)
    return pairs


def _conv(key, val, no, kind):
    try:
        return kind(val)
    except ValueError:
        raise ConfigurationError(f"cannot read {val!r} as {kind.__name__}", key=key, line=no) from None


def _policies(val, no):
    out = []
    for item in filter(None, (p.strip() for p in val.split(","))):
        if "/" not in item:
            raise ConfigurationError(f"expected procedure/policy, got {item!r}", key="policies", line=no)
        proc, pol = item.split("/", 1)
        try:
            out.append(check_policy(proc, Policy.parse(pol, "policies", no)))
        except ConfigurationError as e:
            raise ConfigurationError(str(e).split(" (")[0], key="policies", line=no) from None
    return tuple(out)


def parse_config(source, kind: str = "grid"):
    """Read a flat ``key = value`` file (or text) into a GridSpec or SweepSpec.

    Grid keys: m, n, sig_range, cor_range (``lo:hi:stride``), trials,
    procedure, policy, family, seed, tol, max_iter.  Sweep keys: m, n,
    s_sig, s_cor, deltas (comma list), trials, policies (comma list of
    ``procedure/policy``), family, seed, tol, max_iter.  ``#`` starts a comment.
    """
    if kind not in ("grid", "sweep"):
        raise ConfigurationError(f"unknown config kind {kind!r}")
    text = source
    if isinstance(source, (str, os.PathLike)) and "=" not in str(source) and os.path.exists(source):
        with open(source) as fh:
            text = fh.read()
    pairs = _read_pairs(text)
    allowed = _GRID_KEYS if kind == "grid" else _SWEEP_KEYS
    kw = {}
    for key, (val, no) in pairs.items():
        if key not in allowed:
            raise ConfigurationError("unknown key", key=key, line=no)
        if key in ("m", "n", "trials", "seed", "max_iter", "s_sig", "s_cor"):
            kw[key] = _conv(key, val, no, int)
        elif key == "tol":
            kw[key] = _conv(key, val, no, float)
        elif key in ("sig_range", "cor_range"):
            kw[key] = _parse_range(val, key, no)
        elif key == "deltas":
            kw[key] = tuple(_conv(key, v.strip(), no, float) for v in val.split(",") if v.strip())
        elif key == "policies":
            kw[key] = _policies(val, no)
        elif key == "procedure":
            try:
                kw[key] = Procedure.parse(val)
            except ConfigurationError:
                raise ConfigurationError(f"unknown procedure {val!r}", key=key, line=no) from None
        elif key == "policy":
            kw[key] = Policy.parse(val, key, no)
        elif key == "family":
            try:
                kw[key] = MatrixFamily.parse(val)
            except ConfigurationError:
                raise ConfigurationError(f"unknown family {val!r}", key=key, line=no) from None
    cls = GridSpec if kind == "grid" else SweepSpec
    try:
        return cls(**kw)
    except ConfigurationError as e:
        if e.key in pairs and e.line is None:
            raise ConfigurationError(str(e).split(" (")[0], key=e.key, line=pairs[e.key][1]) from None
        raise


def emit_config(spec) -> str:
    """Companion of :func:`parse_config`: grid or sweep settings as ``key = value`` text."""
    lines = []
    for k, v in asdict(spec).items():
        if k in ("sig_range", "cor_range"):
            v = ":".join(str(x) for x in v)
        elif k == "deltas":
            v = ", ".join(repr(float(d)) for d in v)
        elif k == "policies":
            v = ", ".join(f"{p.value}/{q.value}" for p, q in v)
        elif isinstance(v, Enum):
            v = v.value
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"
