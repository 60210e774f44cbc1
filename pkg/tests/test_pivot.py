import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _instances import ball_point, random_available
from bdfo.core import AvailableSet, DataSet, Datum, basis_size
from bdfo.interp import build_normalized
from bdfo.linalg import max_abs_derivative_ball, solve_square, spectral_norm_inverse
from bdfo.pivot import CompletionFailure, complete, improve
from bdfo.poise import lambda_poisedness


def nonsingular(D):
    solve_square(build_normalized(D).Mhat, np.zeros(len(D)))
    return True


def test_poised_history_is_reused():
    center = np.zeros(2)
    pts = [[0, 0], [1, 0], [0, 1], [-1, 0], [0, -1], [0.6, 0.6]]
    history = [Datum(p, (0, 0)) for p in pts]
    res = complete(history, center, 1.0, xi_acc=1e-6, available=AvailableSet.lagrange(2))
    assert res.new_evals == []
    assert {d.key for d in res.data} == {d.key for d in history}
    assert all(res.from_history)


def test_generation_from_center_only():
    res = complete([Datum([0.0], (0,))], np.zeros(1), 1.0, xi_acc=1e-3, available=AvailableSet.full(1))
    assert len(res.data) == 3
    assert len(res.new_evals) == 2
    assert np.all(np.abs(res.pivot_values) >= 1e-3)
    assert nonsingular(res.data)


def test_history_outside_region_is_ignored():
    history = [Datum([5.0, 0.0], (0, 0)), Datum([0.2, 0.0], (0, 0))]
    res = complete(history, np.zeros(2), 1.0)
    assert all(np.linalg.norm(d.point) <= 1.0 + 1e-12 for d in res.data)
    assert Datum([5.0, 0.0], (0, 0)) not in list(res.data)


def test_forced_alpha_pairing_fails_and_free_selection_succeeds():
    A = AvailableSet.supported_on(2, [0])
    forced = [(1, 0), (1, 0), (0, 0), (0, 0), (0, 0)]
    with pytest.raises(CompletionFailure) as info:
        complete([], np.zeros(2), 1.0, xi_acc=1e-4, available=A, alpha_order=forced)
    assert info.value.pivot == 2
    assert info.value.best == 0.0
    res = complete([], np.zeros(2), 1.0, xi_acc=1e-4, available=A)
    assert nonsingular(res.data)
    assert np.all(np.abs(res.pivot_values) >= 1e-4)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        complete([], np.zeros(1), 0.0)
    with pytest.raises(ValueError):
        improve([], np.zeros(1), 1.0, xi_imp=1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(0, 15))
def test_completion_invariants(seed, n, m):
    rng = np.random.default_rng(seed)
    A = random_available(rng, n)
    center = rng.normal(size=n)
    delta = 10.0 ** rng.uniform(-3, 1)
    alphas = list(AvailableSet.full(n))
    history = [Datum(center + 2 * delta * ball_point(rng, n), alphas[rng.integers(len(alphas))]) for _ in range(m)]
    res = complete(history, center, delta, xi_acc=1e-4, available=A)
    D = res.data
    assert len(D) == basis_size(n)
    assert D[0] == Datum(center, (0,) * n)
    assert len({d.key for d in D}) == len(D)
    assert np.all(np.abs(res.pivot_values) >= 1e-4)
    assert nonsingular(D)
    hist_keys = {d.key for d in history}
    for d in D:
        assert np.linalg.norm(d.point - center) <= delta * (1 + 1e-9)
    for d in res.new_evals:
        assert d.key not in hist_keys
        assert tuple(d.index) in A
    assert {d.key for d in D} - hist_keys - {D[0].key} == {d.key for d in res.new_evals}


def test_optimal_data_is_not_swapped():
    res = complete([], np.zeros(1), 1.0, available=AvailableSet.lagrange(1))
    again = improve(list(res.data), np.zeros(1), 1.0, available=AvailableSet.lagrange(1))
    assert not again.swapped
    assert again.new_evals == []


def test_near_duplicate_is_swapped_and_lambda_drops():
    A = AvailableSet.lagrange(1)
    history = [Datum([0.0], (0,)), Datum([1.0], (0,)), Datum([1 - 1e-6], (0,))]
    before = complete(history, np.zeros(1), 1.0, xi_acc=1e-12, available=A)
    assert abs(before.pivot_values[-1]) < 1e-6
    after = improve(history, np.zeros(1), 1.0, xi_acc=1e-12, available=A)
    assert after.swapped
    assert len(after.new_evals) == 1
    assert after.data[-1].point[0] == pytest.approx(-1.0)
    assert lambda_poisedness(after.data, A, 1.0) < lambda_poisedness(before.data, A, 1.0)


def test_improve_reaches_fixed_point():
    rng = np.random.default_rng(2)
    n = 2
    A = AvailableSet.supported_on(n, [1])
    center = np.zeros(n)
    history = [Datum(center, (0, 0))] + [Datum(0.3 * ball_point(rng, n), (0, 0)) for _ in range(5)]
    for _ in range(50):
        res = improve(history, center, 1.0, xi_acc=1e-8, xi_imp=2.0, available=A)
        history = list(res.data)
        if not res.swapped:
            break
    assert not res.swapped
    assert np.all(np.abs(res.pivot_values) >= 1e-8)
    u = (res.final_pivot[0], res.final_pivot[1:n + 1],
         np.array([[res.final_pivot[3], res.final_pivot[4]], [res.final_pivot[4], res.final_pivot[5]]]))
    ball_max = max(max_abs_derivative_ball(u, a, 1.0 / res.scale).value for a in A)
    assert ball_max <= 2.0 * abs(res.pivot_values[-1]) * (1 + 1e-12)


def test_weight_is_respected():
    # a heavy penalty on derivatives keeps every generated condition a value
    A = AvailableSet.full(2)
    res = complete([], np.zeros(2), 1.0, available=A, weight=lambda y, a: 1.0 if sum(a) == 0 else 1e6)
    assert all(d.order == 0 for d in res.data)
