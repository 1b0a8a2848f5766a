import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from decavg.prox import (
    InfeasibleCenter,
    conjugate_map,
    l1_ball,
    l1_ball_project,
    make_prox,
    sample_l1_ball,
    unconstrained,
)


def bisection_projection(v, R):
    """Independent oracle: bisect on the soft threshold until ||x||_1 = R."""
    a = np.abs(v)
    if a.sum() <= R:
        return v.copy()
    lo, hi = 0.0, a.max()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.maximum(a - mid, 0).sum() > R:
            lo = mid
        else:
            hi = mid
    return np.sign(v) * np.maximum(a - 0.5 * (lo + hi), 0)


@pytest.mark.parametrize(
    "v,R,expected",
    [
        ((3.0, 0.0), 1.0, (1.0, 0.0)),
        ((0.2, 0.1), 1.0, (0.2, 0.1)),
        ((1.0, 1.0), 1.0, (0.5, 0.5)),
    ],
)
def test_projection_examples(v, R, expected):
    assert np.allclose(l1_ball_project(np.array(v), R), expected, atol=1e-15)


def test_projection_rejects_bad_input():
    with pytest.raises(ValueError):
        l1_ball_project(np.array([np.inf, 0.0]), 1.0)
    with pytest.raises(ValueError):
        l1_ball_project(np.array([1.0, 0.0]), 0.0)


def test_projection_matches_bisection_oracle():
    rng = np.random.default_rng(0)
    for _ in range(300):
        m = int(rng.integers(1, 30))
        v = rng.normal(scale=3.0, size=m)
        R = float(rng.uniform(0.05, 5.0))
        assert np.allclose(l1_ball_project(v, R), bisection_projection(v, R), atol=1e-10)


def test_projection_stack_matches_rowwise():
    rng = np.random.default_rng(1)
    V = rng.normal(size=(7, 12))
    V[2] *= 1e-3  # one interior row
    out = l1_ball_project(V, 1.5)
    for row, o in zip(V, out):
        assert np.array_equal(o, l1_ball_project(row, 1.5))


finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(v=arrays(float, st.integers(1, 20), elements=finite), R=st.floats(1e-3, 1e2))
def test_projection_feasible_idempotent_kkt(v, R):
    p = l1_ball_project(v, R)
    assert np.abs(p).sum() <= R + 1e-12 * max(1.0, R) * v.size
    assert np.allclose(l1_ball_project(p, R), p, atol=1e-12 * max(1.0, np.abs(p).max()))
    rng = np.random.default_rng(0)
    Q = sample_l1_ball(rng, v.size, R, 200)
    scale = max(1.0, float(np.abs(v).max())) * R
    assert np.max((Q - p) @ (v - p)) <= 1e-9 * scale


def test_conjugate_map_examples():
    free = make_prox(np.zeros(2), unconstrained(2))
    assert np.array_equal(conjugate_map(free, np.array([1.0, -2.0])), [1.0, -2.0])
    ball = make_prox(np.zeros(2), l1_ball(2, 1.0))
    assert np.allclose(conjugate_map(ball, np.array([3.0, 0.0])), [1.0, 0.0])
    center = np.array([0.3, -0.2])
    shifted = make_prox(center, l1_ball(2, 1.0))
    assert np.array_equal(conjugate_map(shifted, np.zeros(2)), center)


def test_conjugate_map_dimension_mismatch():
    with pytest.raises(ValueError):
        conjugate_map(make_prox(np.zeros(2), l1_ball(2, 1.0)), np.zeros(3))


def test_conjugate_map_is_argmax():
    """Compare with a direct maximisation of <g, x> - d(x) over ball samples."""
    rng = np.random.default_rng(5)
    setup = make_prox(np.array([0.2, 0.1, -0.3]), l1_ball(3, 1.0))
    cand = np.vstack([sample_l1_ball(rng, 3, 1.0, 20000), np.eye(3), -np.eye(3)])
    for _ in range(10):
        g = rng.normal(size=3)
        x = conjugate_map(setup, g)
        val = lambda y: y @ g - 0.5 * np.sum((y - setup.center) ** 2, axis=-1)
        assert val(x) >= val(cand).max() - 1e-12


def test_make_prox():
    c = l1_ball(2, 1.0)
    s = make_prox(np.zeros(2), c)
    assert s.d(np.zeros(2)) == 0.0
    make_prox(np.array([1.0, 0.0]), c)
    with pytest.raises(InfeasibleCenter):
        make_prox(np.array([2.0, 0.0]), c)


@pytest.mark.parametrize("constraint", [l1_ball(5, 0.7), l1_ball(5, 3.0), unconstrained(5)])
def test_nonexpansive_many_pairs(constraint):
    rng = np.random.default_rng(11)
    center = np.zeros(5) if not constraint.bounded else sample_l1_ball(rng, 5, constraint.radius, 1)[0]
    setup = make_prox(center, constraint)
    X = rng.normal(scale=2.0, size=(1000, 5))
    Y = rng.normal(scale=2.0, size=(1000, 5))
    lhs = np.linalg.norm(conjugate_map(setup, X) - conjugate_map(setup, Y), axis=1)
    assert np.all(lhs <= np.linalg.norm(X - Y, axis=1) + 1e-12)


def test_sample_l1_ball_inside():
    pts = sample_l1_ball(np.random.default_rng(0), 4, 2.0, 5000)
    assert np.abs(pts).sum(axis=1).max() <= 2.0 + 1e-12
