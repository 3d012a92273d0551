"""Command line entry point.

Exit codes: 0 success, 1 configuration or domain error, 2 numerical failure
(including a solve that hits its iteration limit).
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import logging
import sys

import numpy as np

from . import deviation as dev
from .ensemble import EnsembleSpec, NoiseSpec, assemble, format_instance, load_instance
from .errors import ConfigurationError, DomainError, NumericalError
from .geometry import eta2_closed_form_l1, minimize_eta2, threshold_curve, threshold_polyline
from .harness import (
    GridSpec,
    SweepSpec,
    _parse_range,
    emit_csv,
    parse_config,
    run_phase_grid,
    run_stable_sweep,
)
from .numeric import RngState
from .regularization import select_lambda, select_tau
from .solvers import Procedure, SolveConfig, solve

log = logging.getLogger("corrsense")

FAMILY_BUILDERS = {
    "sphere": lambda st, n, m, k: dev.sphere_samples(st, n, m, k),
    "sparse-cone": lambda st, n, m, k: dev.sparse_cone(st, n, m, k, max(1, n // 16), max(1, m // 16)),
    "l1-ball": lambda st, n, m, k: dev.l1_ball(st, n, m, k),
}


def _kv(pairs) -> str:
    out = []
    for k, v in pairs:
        if isinstance(v, np.ndarray):
            v = " ".join(repr(float(x)) for x in v)
        elif isinstance(v, float):
            v = repr(v)
        out.append(f"{k} = {v}")
    return "\n".join(out) + "\n"


def _write(args, text):
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _seed(args, default=0):
    return default if args.seed is None else args.seed


def cmd_generate(args):
    noise = {"none": NoiseSpec.none(), "bounded": NoiseSpec.bounded(args.delta),
             "subgaussian": NoiseSpec.subgaussian(args.L, scale=args.scale)}[args.noise]
    spec = EnsembleSpec(args.m, args.n, args.family, noise, args.K)
    P = assemble(RngState(_seed(args)), spec, args.s_sig, args.s_cor)
    _write(args, format_instance(P))
    return 0


def cmd_solve(args):
    P = load_instance(args.instance)
    cfg = SolveConfig(args.procedure, delta=args.delta, kappa=args.kappa, lam=args.lam,
                      tau1=args.tau1, tau2=args.tau2, tol=args.tol, max_iter=args.max_iter)
    r = solve(P, cfg)
    _write(args, _kv([
        ("procedure", r.procedure.value), ("converged", str(r.converged).lower()),
        ("iterations", r.iterations), ("objective", r.objective_value),
        ("primal_residual", float(r.primal_residuals[-1]) if len(r.primal_residuals) else float("nan")),
        ("dual_residual", float(r.dual_residuals[-1]) if len(r.dual_residuals) else float("nan")),
        ("relative_error", float(r.relative_error)), ("joint_error", float(r.joint_error)),
        ("x_hat", r.x_hat), ("v_hat", r.v_hat),
    ]))
    return 0 if r.converged else 2


def cmd_eta2(args):
    if args.t is not None:
        _write(args, _kv([("n", args.n), ("s", args.s), ("t", args.t),
                          ("eta2", float(eta2_closed_form_l1(args.n, args.s, args.t)))]))
    else:
        p = minimize_eta2(args.n, args.s)
        _write(args, _kv([("n", args.n), ("s", args.s), ("t_star", p.t_star), ("eta2_min", p.J_min)]))
    return 0


def cmd_lambda_star(args):
    sel = select_lambda(args.n, args.s_sig, args.m, args.s_cor)
    _write(args, _kv([("lambda1_star", sel.lambda1_star), ("lambda2_star", sel.lambda2_star),
                      ("lambda_star", sel.lambda_star)]))
    return 0


def cmd_tau_star(args):
    sel = select_tau(args.strategy, args.regime, n=args.n, m=args.m, s_sig=args.s_sig, s_cor=args.s_cor,
                     beta=args.beta, delta=args.delta, L=args.L, K=args.K, C=args.C,
                     gamma_method=args.gamma_method, N=args.samples, rng=_seed(args))
    _write(args, _kv([("regime", sel.regime.value), ("strategy", sel.strategy.value),
                      ("tau1", sel.tau1), ("tau2", sel.tau2),
                      ("tau1_bound", sel.tau1_bound), ("tau2_bound", sel.tau2_bound)]))
    return 0


def cmd_threshold(args):
    buf = io.StringIO()
    buf.write("s_sig,s_cor\n")
    if args.real:
        for s, c in threshold_polyline(args.m, args.n, args.samples):
            buf.write(f"{float(s)!r},{float(c)!r}\n")
    else:
        for s, c in threshold_curve(args.m, args.n):
            buf.write(f"{s},{c}\n")
    _write(args, buf.getvalue())
    return 0


def cmd_deviation(args):
    root = RngState(_seed(args))
    fams = [f.strip() for f in args.families.split(",") if f.strip()]
    for f in fams:
        if f not in FAMILY_BUILDERS:
            raise ConfigurationError(f"unknown point-set family {f!r}", key="families")
    buf = io.StringIO()
    buf.write("family,size,trial,sup_dev,gamma_est,ratio\n")
    for f in fams:
        for size in args.sizes:
            T = FAMILY_BUILDERS[f](root.child("set", f, size), args.n, args.m, size)
            rep = dev.verify_deviation_bound([T], args.trials, root.child("run", f, size), args.ensemble)[0]
            for row in rep.rows():
                buf.write(",".join([row[0], str(row[1]), str(row[2])] + [repr(v) for v in row[3:]]) + "\n")
    _write(args, buf.getvalue())
    return 0


def _spec_from(args, kind):
    if args.config:
        spec = parse_config(args.config, kind)
        over = {}
    else:
        spec = GridSpec() if kind == "grid" else SweepSpec()
        over = {k: getattr(args, k) for k in ("m", "n", "trials", "family", "tol", "max_iter")
                if getattr(args, k, None) is not None}
        if kind == "grid":
            over.update({k: getattr(args, k) for k in ("procedure", "policy", "sig_range", "cor_range")
                         if getattr(args, k) is not None})
        else:
            over.update({k: getattr(args, k) for k in ("s_sig", "s_cor", "deltas")
                         if getattr(args, k) is not None})
    if args.seed is not None:
        over["seed"] = args.seed
    if kind == "grid" and args.config is None and "policy" not in over and "procedure" in over:
        over["policy"] = None
    return dataclasses.replace(spec, **over) if over else spec


def cmd_phase(args):
    res = run_phase_grid(_spec_from(args, "grid"), threads=args.threads)
    _write(args, emit_csv(res))
    return 0


def cmd_stable(args):
    res = run_stable_sweep(_spec_from(args, "sweep"), threads=args.threads)
    _write(args, emit_csv(res))
    return 0


def _range(text):
    return _parse_range(text, "range")


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="base seed (default 0)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for grids and sweeps")
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--config", default=None, help="flat key = value config file")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="corrsense", description="Corrupted sensing experiments.")
    sub = p.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("generate", parents=[common], help="draw a problem instance")
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--s-sig", type=int, default=0)
    g.add_argument("--s-cor", type=int, default=0)
    g.add_argument("--family", default="gaussian")
    g.add_argument("--noise", choices=("none", "bounded", "subgaussian"), default="none")
    g.add_argument("--delta", type=float, default=0.0)
    g.add_argument("--L", type=float, default=1.0)
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--K", type=float, default=1.0)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", parents=[common], help="solve a serialized instance")
    s.add_argument("instance")
    s.add_argument("--procedure", default="constrained-corruption", choices=[q.value for q in Procedure])
    s.add_argument("--lambda", dest="lam", type=float, default=1.0)
    s.add_argument("--tau1", type=float, default=1e-5)
    s.add_argument("--tau2", type=float, default=1e-5)
    s.add_argument("--delta", type=float, default=None)
    s.add_argument("--kappa", type=float, default=None)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--max-iter", type=int, default=20000)
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("eta2", parents=[common], help="expected squared distance to the scaled subdifferential")
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--s", type=float, required=True)
    e.add_argument("--t", type=float, default=None, help="scaling; omitted means minimise over t")
    e.set_defaults(func=cmd_eta2)

    ls = sub.add_parser("lambda-star", parents=[common], help="optimal penalty ratio")
    for k in ("--n", "--m", "--s-sig", "--s-cor"):
        ls.add_argument(k, type=int, required=True)
    ls.set_defaults(func=cmd_lambda_star)

    ts = sub.add_parser("tau-star", parents=[common], help="penalties for the fully penalized program")
    for k in ("--n", "--m"):
        ts.add_argument(k, type=int, required=True)
    ts.add_argument("--s-sig", type=int, default=0)
    ts.add_argument("--s-cor", type=int, default=0)
    ts.add_argument("--regime", choices=("noiseless", "bounded", "subgaussian"), default="bounded")
    ts.add_argument("--strategy", choices=("min-measurements", "min-error"), default="min-error")
    ts.add_argument("--delta", type=float, default=0.0)
    ts.add_argument("--L", type=float, default=1.0)
    ts.add_argument("--beta", type=float, default=2.0)
    ts.add_argument("--K", type=float, default=1.0)
    ts.add_argument("--C", type=float, default=1.0)
    ts.add_argument("--gamma-method", choices=("mc", "asymptotic", "sqrt-dim"), default="mc")
    ts.add_argument("--samples", type=int, default=2000)
    ts.set_defaults(func=cmd_tau_star)

    tc = sub.add_parser("threshold-curve", parents=[common], help="predicted phase boundary")
    tc.add_argument("--m", type=int, required=True)
    tc.add_argument("--n", type=int, required=True)
    tc.add_argument("--real", action="store_true", help="dense real-valued curve")
    tc.add_argument("--samples", type=int, default=129)
    tc.set_defaults(func=cmd_threshold)

    dv = sub.add_parser("deviation", parents=[common], help="empirical matrix deviation study")
    dv.add_argument("--m", type=int, default=64)
    dv.add_argument("--n", type=int, default=64)
    dv.add_argument("--families", default="sphere,sparse-cone,l1-ball")
    dv.add_argument("--sizes", type=lambda t: [int(v) for v in t.split(",")], default=[100])
    dv.add_argument("--trials", type=int, default=200)
    dv.add_argument("--ensemble", default="gaussian")
    dv.set_defaults(func=cmd_deviation)

    ph = sub.add_parser("phase", parents=[common], help="phase-transition grid")
    ph.add_argument("--m", type=int)
    ph.add_argument("--n", type=int)
    ph.add_argument("--trials", type=int)
    ph.add_argument("--procedure")
    ph.add_argument("--policy")
    ph.add_argument("--family")
    ph.add_argument("--sig-range", type=_range)
    ph.add_argument("--cor-range", type=_range)
    ph.add_argument("--tol", type=float)
    ph.add_argument("--max-iter", type=int)
    ph.set_defaults(func=cmd_phase)

    sw = sub.add_parser("stable", parents=[common], help="noise-level sweep")
    sw.add_argument("--m", type=int)
    sw.add_argument("--n", type=int)
    sw.add_argument("--s-sig", type=int)
    sw.add_argument("--s-cor", type=int)
    sw.add_argument("--deltas", type=_floats)
    sw.add_argument("--trials", type=int)
    sw.add_argument("--family")
    sw.add_argument("--tol", type=float)
    sw.add_argument("--max-iter", type=int)
    sw.set_defaults(func=cmd_stable)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse usage errors are configuration errors
        return 0 if e.code in (0, None) else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, DomainError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
