import numpy as np
import pytest
import scipy.optimize
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from bdfo.core import AvailableSet
from bdfo.linalg import (Singular, argmax_over_available, eig_min_symmetric, max_abs_derivative_ball,
                         max_abs_quadratic_ball, min_quadratic_ball, solve_square, spectral_norm_inverse)


def circle(delta, m=20001):
    t = np.linspace(0, 2 * np.pi, m)
    return delta * np.column_stack((np.cos(t), np.sin(t)))


def disk(delta, m=201):
    u = np.linspace(-delta, delta, m)
    X, Y = np.meshgrid(u, u)
    pts = np.column_stack((X.ravel(), Y.ravel()))
    return pts[np.linalg.norm(pts, axis=1) <= delta]


def test_solve_square_identity():
    x, rcond = solve_square(np.eye(3), [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(x, [1, 2, 3])
    assert rcond == pytest.approx(1.0)


def test_solve_square_duplicated_rows():
    with pytest.raises(Singular):
        solve_square(np.array([[1.0, 2.0], [1.0, 2.0]]), [1.0, 1.0])


def test_solve_square_worked_system():
    M = np.array([[1, 0, 0], [1, 1, 0.5], [0, 1, 1]])
    x, _ = solve_square(M, [0.0, 1.0, 2.0])
    np.testing.assert_allclose(x, [0, 0, 2], atol=1e-14)


def test_trs_interior_newton():
    r = min_quadratic_ball(np.array([1.0, 0.0]), np.eye(2), 10.0)
    np.testing.assert_allclose(r.point, [-1, 0], atol=1e-12)
    assert np.linalg.norm(r.point) < 10


def test_trs_linear_boundary():
    r = min_quadratic_ball(np.array([1.0, 0.0]), np.zeros((2, 2)), 1.0)
    np.testing.assert_allclose(r.point, [-1, 0], atol=1e-12)


def test_trs_hard_case_matches_circle_scan():
    H = np.diag([-1.0, 1.0])
    r = min_quadratic_ball(np.zeros(2), H, 1.0)
    scan = min(0.5 * p @ H @ p for p in circle(1.0))
    assert r.value == pytest.approx(-0.5, abs=1e-12)
    assert r.value == pytest.approx(scan, abs=1e-8)
    assert abs(abs(r.point[0]) - 1) < 1e-10


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.tuples(
    arrays(np.float64, n, elements=st.floats(-5, 5)),
    arrays(np.float64, (n, n), elements=st.floats(-5, 5)),
    st.floats(0.1, 5))))
def test_trs_global_optimality(args):
    g, B, delta = args
    H = 0.5 * (B + B.T)
    r = min_quadratic_ball(g, H, delta)
    s = r.point
    assert np.linalg.norm(s) <= delta * (1 + 1e-10)
    lam = r.multiplier
    n = g.size
    # Moré-Sorensen characterization
    assert lam >= -1e-8
    assert eig_min_symmetric(H + lam * np.eye(n)) >= -1e-7 * max(1, np.abs(H).max())
    np.testing.assert_allclose((H + lam * np.eye(n)) @ s, -g, atol=1e-6 * max(1, np.abs(g).max(), np.abs(H).max()))
    assert lam * (delta - np.linalg.norm(s)) == pytest.approx(0, abs=1e-6 * max(1, lam * delta))
    # no local solver from random starts finds anything better
    cons = {"type": "ineq", "fun": lambda x: delta**2 - x @ x}
    for x0 in (np.zeros(n), -g / max(np.linalg.norm(g), 1e-12) * delta * 0.5):
        res = scipy.optimize.minimize(lambda x: g @ x + 0.5 * x @ H @ x, x0, method="SLSQP", constraints=[cons])
        if np.linalg.norm(res.x) <= delta * (1 + 1e-8):
            assert r.value <= res.fun + 1e-7 * max(1, abs(res.fun))


def test_max_abs_quadratic_examples():
    r = max_abs_quadratic_ball(0.0, np.array([1.0, 0.0]), np.zeros((2, 2)), 1.0)
    assert r.value == pytest.approx(1.0)
    assert abs(r.point[0]) == pytest.approx(1.0)
    r = max_abs_quadratic_ball(1.0, np.zeros(1), np.array([[-2.0]]), 1.0)
    grid = np.linspace(-1, 1, 20001)
    assert r.value == pytest.approx(np.abs(1 - grid**2).max())
    assert r.value == pytest.approx(1.0)
    r = max_abs_quadratic_ball(0.0, np.zeros(2), np.eye(2), 2.0)
    assert r.value == pytest.approx(2.0)
    assert np.linalg.norm(r.point) == pytest.approx(2.0)


def test_max_abs_derivative_examples():
    r = max_abs_derivative_ball((0.0, np.array([2.0, 0.0]), np.zeros((2, 2))), (1, 0), 1.0)
    assert r.value == 2.0
    np.testing.assert_array_equal(r.point, [0, 0])
    r = max_abs_derivative_ball((0.0, np.zeros(2), np.array([[1.0, 0.0], [0.0, 0.0]])), (2, 0), 5.0)
    assert r.value == 1.0
    u = (0.0, np.array([1.0, 0.0]), np.array([[1.0, 0.0], [0.0, 0.0]]))
    r = max_abs_derivative_ball(u, (1, 0), 1.0)
    assert r.value == pytest.approx(max(abs(1 + p[0]) for p in disk(1.0)))
    np.testing.assert_allclose(r.point, [1, 0], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.tuples(st.floats(-3, 3), arrays(np.float64, 2, elements=st.floats(-3, 3)),
                 arrays(np.float64, (2, 2), elements=st.floats(-3, 3)), st.floats(0.2, 3),
                 st.sampled_from([(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)])))
def test_max_abs_derivative_dominates_grid(args):
    c, g, B, delta, alpha = args
    H = 0.5 * (B + B.T)
    r = max_abs_derivative_ball((c, g, H), alpha, delta)
    pts = disk(delta, 61)
    if sum(alpha) == 0:
        vals = np.abs(c + pts @ g + 0.5 * np.einsum("ij,jk,ik->i", pts, H, pts))
    elif sum(alpha) == 1:
        k = alpha.index(1)
        vals = np.abs(g[k] + pts @ H[k])
    else:
        k = alpha.index(max(alpha))
        l = k if max(alpha) == 2 else alpha.index(1, k + 1)
        vals = np.full(len(pts), abs(H[k, l]))
    assert r.value >= vals.max() - 1e-9
    assert np.linalg.norm(r.point) <= delta * (1 + 1e-10)
    # the reported point attains the reported value
    s = r.point
    if sum(alpha) == 0:
        at = abs(c + g @ s + 0.5 * s @ H @ s)
    elif sum(alpha) == 1:
        at = abs(g[alpha.index(1)] + H[alpha.index(1)] @ s)
    else:
        at = r.value
    assert at == pytest.approx(r.value, rel=1e-9, abs=1e-12)


def test_argmax_prefers_lower_order_on_ties():
    u = (0.0, np.array([1.0, 0.0]), np.zeros((2, 2)))
    alpha, ext = argmax_over_available(u, AvailableSet.full(2), 1.0)
    assert alpha == (0, 0)
    assert ext.value == pytest.approx(1.0)


def test_argmax_weight_changes_choice():
    u = (0.0, np.array([1.0, 0.0]), np.zeros((2, 2)))
    alpha, _ = argmax_over_available(u, AvailableSet.full(2), 1.0, weight=lambda s, a: 1.0 if sum(a) else 2.0)
    assert alpha == (1, 0)


def test_eig_min_examples():
    assert eig_min_symmetric(np.diag([1.0, 2.0])) == pytest.approx(1)
    assert eig_min_symmetric(np.diag([-3.0, 2.0])) == pytest.approx(-3)
    assert eig_min_symmetric(np.array([[0.0, 1.0], [1.0, 0.0]])) == pytest.approx(-1)


def test_spectral_norm_inverse_examples():
    assert spectral_norm_inverse(np.eye(3)) == pytest.approx(1)
    assert spectral_norm_inverse(np.diag([2.0, 0.5])) == pytest.approx(2)
    M = np.array([[1, 0, 0], [1, 1, 0.5], [0, 1, 1]])
    # independent route: largest eigenvalue of (M^T M)^-1
    oracle = np.sqrt(np.linalg.eigvalsh(np.linalg.inv(M.T @ M)).max())
    assert spectral_norm_inverse(M) == pytest.approx(oracle, rel=1e-12)
    assert spectral_norm_inverse(M) == pytest.approx(4.58361, abs=1e-5)


@pytest.mark.parametrize("size", [1e-176, 1e150])
def test_trust_region_extreme_scales(size):
    g = np.array([1.0, -2.0]) * size
    H = np.array([[2.0, 0.5], [0.5, -1.0]]) * size
    r = min_quadratic_ball(g, H, 1.0)
    ref = min_quadratic_ball(g / size, H / size, 1.0)
    np.testing.assert_allclose(r.point, ref.point, rtol=1e-10, atol=1e-12)
    assert r.value == pytest.approx(ref.value * size, rel=1e-10)
