import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corrsense.errors import DomainError
from corrsense.geometry import (
    L1,
    L2,
    DescentConeSampler,
    DualNormSampler,
    FiniteSetSampler,
    ProductConeSampler,
    WeightedConeSampler,
    dist_to_scaled_subdiff_l1,
    eta2_closed_form_l1,
    estimate_gamma_mc,
    eta_bracket,
    minimize_eta2,
    sandwich_check,
    summarize_geometry,
    threshold_crossing,
    threshold_curve,
    width_surrogate,
)
from corrsense.numeric import RngState


def _clamp_oracle(g, x, t):
    # nearest point of the product set (points on the support, intervals off it)
    target = np.where(x != 0, t * np.sign(x), np.clip(g, -t, t))
    return float(np.sum((g - target) ** 2))


def _grid_min(n, s, step=1e-4):
    ts = np.arange(0.0, math.sqrt(2 * math.log(max(n, 2))) + 3, step)
    J = eta2_closed_form_l1(n, s, ts)
    return J.min()


def test_dist_examples():
    assert dist_to_scaled_subdiff_l1(np.array([0.5, 2.0]), np.array([1.0, 0.0]), 1.0) == pytest.approx(1.25)
    g = np.array([0.3, -1.2, 2.0])
    assert dist_to_scaled_subdiff_l1(g, np.array([1.0, 0, 0]), 0.0) == pytest.approx(np.sum(g**2))
    with pytest.raises(DomainError):
        dist_to_scaled_subdiff_l1(g, np.zeros(3), -0.1)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 12), st.floats(0, 4))
def test_dist_matches_clamp_oracle(seed, d, t):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(d) * 2
    x = rng.standard_normal(d) * (rng.random(d) < 0.4)
    assert dist_to_scaled_subdiff_l1(g, x, t) == pytest.approx(_clamp_oracle(g, x, t), abs=1e-10)


def test_dist_convex_in_t():
    rng = np.random.default_rng(1)
    g, x = rng.standard_normal(30), np.r_[np.ones(5), np.zeros(25)]
    ts = np.linspace(0, 4, 401)
    vals = np.array([dist_to_scaled_subdiff_l1(g, x, t) for t in ts])
    assert np.all(np.diff(vals, 2) > -1e-9)


def test_closed_form_identities():
    for n, s in [(1, 0), (10, 3), (128, 20), (64, 64)]:
        assert eta2_closed_form_l1(n, s, 0.0) == pytest.approx(n, abs=1e-9)
    for t in [0.2, 1.0, 3.0]:
        assert eta2_closed_form_l1(50, 50, t) == pytest.approx(50 * (1 + t * t))
    with pytest.raises(DomainError):
        eta2_closed_form_l1(5, 6, 1.0)


def test_closed_form_vs_monte_carlo_reference_point():
    n, s, t = 128, 20, 1.5
    x = np.r_[np.ones(s), np.zeros(n - s)]
    G = RngState(77).generator().standard_normal((20_000, n))
    mc = dist_to_scaled_subdiff_l1(G, x, t).mean()
    assert abs(mc / eta2_closed_form_l1(n, s, t) - 1) < 0.01


def test_minimize_eta2_cases():
    p = minimize_eta2(40, 40)
    assert p.t_star == 0.0 and p.J_min == pytest.approx(40)
    p = minimize_eta2(128, 20)
    assert abs(p.J_min - _grid_min(128, 20)) < 1e-3
    assert p.curve.shape[0] >= 64
    assert minimize_eta2(128, 10).J_min < minimize_eta2(128, 30).J_min
    J = p.curve[:, 1]
    assert np.all(np.diff(J, 2) > -1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 200).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n))))
def test_minimize_eta2_local_optimality(ns):
    n, s = ns
    p = minimize_eta2(n, s)
    for dt in (-1e-3, 1e-3):
        t = p.t_star + dt
        if 0 <= t <= eta_bracket(n):  # s = 0 profiles decrease up to the bracket end
            assert p.J_min <= eta2_closed_form_l1(n, s, t) + 1e-12


def test_width_surrogate_and_threshold():
    assert width_surrogate(30, 30) == pytest.approx(30)
    assert width_surrogate(128, 20) == minimize_eta2(128, 20).J_min
    assert width_surrogate(64, 0) < 1e-3
    curve = dict(threshold_curve(128, 128))
    for a, b in curve.items():
        assert width_surrogate(128, a) + width_surrogate(128, b) <= 128
        if b < 128:
            assert width_surrogate(128, a) + width_surrogate(128, b + 1) > 128
    # symmetric in the two roles when m = n
    for a, b in curve.items():
        if b in curve:
            assert curve[b] >= a - 1
    assert 128 not in curve  # infeasible row omitted


def test_threshold_crossing_brackets_integer_curve():
    for s_sig, s_cor in threshold_curve(64, 64)[:40:5]:
        c = threshold_crossing(64, 64, s_sig)
        assert s_cor <= c < s_cor + 1


def test_gamma_mc_examples():
    e1 = np.eye(4)[:1]
    est, se = estimate_gamma_mc(FiniteSetSampler(e1), 20_000, RngState(3))
    assert abs(est - math.sqrt(2 / math.pi)) <= 3 * se
    d = 16
    est, se = estimate_gamma_mc(DualNormSampler(L2, d), 20_000, RngState(4))
    assert abs(est - math.sqrt(d) * (1 - 1 / (4 * d))) <= 3 * se + 2e-3  # series truncation
    est, se = estimate_gamma_mc(FiniteSetSampler(np.zeros((1, 3))), 100, RngState(5))
    assert est == 0.0 and se == 0.0
    with pytest.raises(DomainError):
        estimate_gamma_mc(FiniteSetSampler(e1), 1, RngState(0))


def test_l1_ball_complexity_is_expected_max():
    # order statistics oracle: E max |g_i| via quadrature of 1 - (2 Phi(t) - 1)^d
    from scipy import integrate, special

    d = 16
    oracle, _ = integrate.quad(lambda t: 1 - special.erf(t / math.sqrt(2)) ** d, 0, np.inf)
    est, se = estimate_gamma_mc(L1.ball_sampler(d), 20_000, RngState(8))
    assert abs(est - oracle) <= 3 * se


def test_cone_sampler_matches_projection_by_optimizer():
    # brute force: maximise <g,u> over the descent cone intersected with the unit ball
    cvxpy = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(2)
    x = np.r_[1.5, -0.7, np.zeros(6)]
    smp = DescentConeSampler(x)
    for _ in range(5):
        g = rng.standard_normal(8)
        u = cvxpy.Variable(8)
        on = x != 0
        cons = [cvxpy.norm(u, 2) <= 1,
                np.sign(x[on]) @ u[np.flatnonzero(on)] + cvxpy.norm1(u[np.flatnonzero(~on)]) <= 0]
        prob = cvxpy.Problem(cvxpy.Maximize(g @ u), cons)
        prob.solve(solver="CLARABEL")
        assert smp.width_terms(g[None])[0] == pytest.approx(max(prob.value, 0.0), abs=1e-6)


def test_weighted_cone_reduces_to_descent_cone():
    rng = np.random.default_rng(5)
    x, v = np.r_[1.0, np.zeros(5)], np.r_[0.0, -2.0, 0.0]
    G = rng.standard_normal((50, 9))
    a = WeightedConeSampler(x, v, 1.0).width_terms(G)
    b = DescentConeSampler(np.r_[x, v]).width_terms(G)
    assert np.allclose(a, b)


def test_product_cone_complexity_bound():
    # complexity of the product cone stays under twice (sum of widths + 1)
    n = m = 64
    for s_sig, s_cor in [(4, 4), (10, 6), (20, 2)]:
        x, v = np.r_[np.ones(s_sig), np.zeros(n - s_sig)], np.r_[np.ones(s_cor), np.zeros(m - s_cor)]
        gj, se = estimate_gamma_mc(ProductConeSampler(x, v), 2000, RngState(s_sig))
        bound = 2 * (math.sqrt(width_surrogate(n, s_sig)) + math.sqrt(width_surrogate(m, s_cor)) + 1)
        assert gj <= bound + 3 * se


def test_sandwich_examples():
    assert sandwich_check(math.sqrt(2 / math.pi), 0.0, 1.0)
    assert sandwich_check(0.0, 0.0, 0.0)
    assert not sandwich_check(5.0, 0.0, 1.0)
    d = 16
    G = RngState(9).generator().standard_normal((2000, d))
    norms = np.linalg.norm(G, axis=1)
    gamma, gse = norms.mean(), norms.std(ddof=1) / math.sqrt(2000)
    # the sphere is symmetric, so width and complexity coincide; y0 is any unit vector
    assert sandwich_check(gamma, gamma, 1.0, gse, gse)


def test_summary_invariants():
    s = summarize_geometry(64, 6, 64, 4, RngState(1), N=1000)
    assert s.threshold == s.width_sig_sq + s.width_cor_sq
    for gam, se, om in [(s.gamma_sig, s.gamma_sig_se, s.omega_sig), (s.gamma_cor, s.gamma_cor_se, s.omega_cor)]:
        assert sandwich_check(gam, om, 1.0, se)


def test_norm_spec():
    rng = np.random.default_rng(0)
    for norm in (L1, L2):
        for _ in range(50):
            u, w = rng.standard_normal(7), rng.standard_normal(7)
            c = rng.standard_normal()
            assert norm.evaluate(c * u) == pytest.approx(abs(c) * norm.evaluate(u))
            assert norm.evaluate(u + w) <= norm.evaluate(u) + norm.evaluate(w) + 1e-12
            assert norm.evaluate(u) <= norm.alpha(7) * np.linalg.norm(u) + 1e-9
    assert L1.evaluate(np.ones(9)) == pytest.approx(L1.alpha(9) * np.linalg.norm(np.ones(9)), abs=1e-9)
    assert L1.dual(np.array([1.0, -3.0])) == 3.0
    assert L2.dual(np.array([3.0, 4.0])) == 5.0
    # L2 distances: singleton subdifferential off zero, unit ball at zero
    g = np.array([3.0, 4.0])
    assert L2.dist_to_scaled_subdiff(g, np.array([1.0, 0.0]), 2.0) == pytest.approx(1 + 16)
    assert L2.dist_to_scaled_subdiff(g, np.zeros(2), 2.0) == pytest.approx(9.0)
    # dual of the l1 ball is the sup of inner products over its vertices
    u = rng.standard_normal(5)
    verts = np.vstack([np.eye(5), -np.eye(5)])
    assert L1.dual(u) == pytest.approx((verts @ u).max())
