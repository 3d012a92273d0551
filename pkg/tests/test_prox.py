import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from corrsense.errors import DomainError
from corrsense.prox import project_l1_ball, project_l2_ball, soft_threshold

vec = arrays(np.float64, st.integers(1, 12), elements=st.floats(-50, 50))


def test_soft_threshold_examples():
    assert soft_threshold(np.array([3.0]), 1.0)[0] == 2.0
    assert soft_threshold(np.array([-0.5]), 1.0)[0] == 0.0
    u = np.array([1.5, -2.0, 0.0])
    assert np.array_equal(soft_threshold(u, 0.0), u)
    with pytest.raises(DomainError):
        soft_threshold(u, -1.0)


def test_soft_threshold_batched_thresholds():
    U = np.array([[3.0, -3.0], [3.0, -3.0]])
    out = soft_threshold(U, np.array([1.0, 2.0]))
    assert np.array_equal(out, [[2.0, -2.0], [1.0, -1.0]])


def test_l1_projection_examples():
    assert np.allclose(project_l1_ball(np.array([3.0, 0.0]), 1.0), [1.0, 0.0])
    assert np.array_equal(project_l1_ball(np.array([0.3, 0.2]), 1.0), [0.3, 0.2])
    assert np.allclose(project_l1_ball(np.array([2.0, 1.0]), 1.0), [1.0, 0.0])
    assert np.array_equal(project_l1_ball(np.array([2.0, -1.0]), 0.0), [0.0, 0.0])
    with pytest.raises(DomainError):
        project_l1_ball(np.array([1.0]), -1.0)


def test_l1_projection_against_simplex_grid_oracle():
    # brute force over a fine grid of the boundary and interior of the 2-D l1 ball
    u = np.array([2.0, 1.0])
    h = 1e-3
    best, arg = np.inf, None
    for a in np.arange(-1, 1 + h / 2, h):
        rest = 1 - abs(a)
        for b in (np.clip(u[1], -rest, rest),):
            d = (a - u[0]) ** 2 + (b - u[1]) ** 2
            if d < best:
                best, arg = d, (a, b)
    assert np.allclose(project_l1_ball(u, 1.0), arg, atol=2 * h)


def test_l1_projection_matches_sign_pattern_enumeration():
    rng = np.random.default_rng(3)
    for _ in range(20):
        u = rng.standard_normal(4) * 2
        r = 0.7
        best = None
        # enumerate faces: support set + signs fixed by u, solve equality projection
        for k in range(1, 5):
            for S in itertools.combinations(range(4), k):
                S = list(S)
                sgn = np.sign(u[S])
                theta = (np.abs(u[S]).sum() - r) / k
                w = np.zeros(4)
                w[S] = sgn * (np.abs(u[S]) - theta)
                if np.any(np.sign(w[S]) != sgn) and theta > 0:
                    continue
                if np.abs(w).sum() > r + 1e-12:
                    continue
                d = np.sum((w - u) ** 2)
                if best is None or d < best[0]:
                    best = (d, w)
        if np.abs(u).sum() <= r:
            best = (0.0, u)
        assert np.allclose(project_l1_ball(u, r), best[1], atol=1e-12)


@settings(max_examples=200)
@given(vec, st.floats(0, 20))
def test_l1_projection_kkt(u, r):
    p = project_l1_ball(u, r)
    assert np.abs(p).sum() <= r + 1e-9
    if np.abs(u).sum() > r:
        nz = p != 0
        shrink = np.abs(u[nz]) - np.abs(p[nz])
        if shrink.size:
            assert np.ptp(shrink) <= 1e-9 * max(1.0, np.abs(u).max())
            assert np.all(np.abs(u[~nz]) <= shrink.max() + 1e-9)


@settings(max_examples=200)
@given(st.data(), st.integers(1, 10), st.floats(0, 10))
def test_operators_nonexpansive(data, d, r):
    el = st.floats(-20, 20)
    u = data.draw(arrays(np.float64, d, elements=el))
    w = data.draw(arrays(np.float64, d, elements=el))
    gap = np.linalg.norm(u - w) + 1e-9
    assert np.linalg.norm(soft_threshold(u, r) - soft_threshold(w, r)) <= gap
    assert np.linalg.norm(project_l1_ball(u, r) - project_l1_ball(w, r)) <= gap
    assert np.linalg.norm(project_l2_ball(u, r) - project_l2_ball(w, r)) <= gap


def test_batched_l1_projection_matches_rowwise():
    rng = np.random.default_rng(0)
    U = rng.standard_normal((7, 9)) * 3
    R = rng.uniform(0, 4, 7)
    out = project_l1_ball(U, R)
    for i in range(7):
        assert np.allclose(out[i], project_l1_ball(U[i], R[i]))


def test_l2_projection():
    assert np.allclose(project_l2_ball(np.array([3.0, 4.0]), 1.0), [0.6, 0.8])
    assert np.array_equal(project_l2_ball(np.array([3.0, 4.0]), 0.0), [0.0, 0.0])
    assert np.array_equal(project_l2_ball(np.array([0.1, 0.1]), 1.0), [0.1, 0.1])
