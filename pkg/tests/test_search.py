"""Internals of the posterior-pool optimizer."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from privex import _search as S
from privex.dependence import rho2_matrix
from privex.filters import leakage
from privex.prob_core import mutual_information_matrix

from conftest import joints


def central_difference(fun, W, h=1e-6):
    g = np.zeros_like(W)
    it = np.nditer(W, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        Wp, Wm = W.copy(), W.copy()
        Wp[idx] += h
        Wm[idx] -= h
        g[idx] = (fun(Wp) - fun(Wm)) / (2 * h)
    return g


def _random_filters(seed, ny, nz=3, R=2):
    rng = np.random.default_rng(seed)
    # interior points, where central differences with h=1e-6 are accurate
    return 0.8 * rng.dirichlet(np.ones(nz), size=(R, ny)) + 0.2 / nz


@given(joints(3, 3), st.integers(0, 2**31))
def test_utility_gradient(j, seed):
    prob = S.Problem(j.pxy)
    W = _random_filters(seed, prob.ny)
    val, grad = S.utility_and_grad(prob, W)
    for r in range(W.shape[0]):
        assert val[r] == pytest.approx(mutual_information_matrix(prob.py[:, None] * W[r]), abs=1e-12)
    num = central_difference(lambda V: S.utility_and_grad(prob, V)[0].sum(), W)
    np.testing.assert_allclose(grad, num, atol=1e-6)


@given(joints(3, 3), st.integers(0, 2**31))
def test_mi_leak_gradient(j, seed):
    prob = S.Problem(j.pxy)
    W = _random_filters(seed, prob.ny)
    val, grad = S.mi_leak_and_grad(prob, W)
    assert val[0] == pytest.approx(leakage(j.pxy, W[0])[0], abs=1e-12)
    num = central_difference(lambda V: S.mi_leak_and_grad(prob, V)[0].sum(), W)
    np.testing.assert_allclose(grad, num, atol=1e-6)


@given(joints(3, 3), st.integers(0, 2**31))
def test_rho2_analytic_gradient_matches_central_differences(j, seed):
    prob = S.Problem(j.pxy)
    W = _random_filters(seed, prob.ny)
    val, grad = S.rho2_leak_and_grad(prob, W)
    assert val[0] == pytest.approx(rho2_matrix(j.pxy @ W[0]), abs=1e-12)
    sv = [np.linalg.svd(j.pxy @ W[r] / np.sqrt(np.outer(prob.px, (j.pxy @ W[r]).sum(0))),
                        compute_uv=False) for r in range(W.shape[0])]
    if any(s[1] < 1e-3 or (s.size > 2 and abs(s[1] - s[2]) < 1e-3) for s in sv):
        return  # gradient undefined at a repeated singular value
    num = central_difference(lambda V: S.rho2_leak_and_grad(prob, V)[0].sum(), W)
    np.testing.assert_allclose(grad, num, atol=1e-5)


@given(st.integers(0, 2**31))
def test_project_simplex(seed):
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((3, 4, 5)) * 3
    P = S.project_simplex(V)
    assert np.all(P >= 0)
    np.testing.assert_allclose(P.sum(-1), 1.0, atol=1e-12)
    # optimality: for the projection, (v - p) is constant on the support
    d = (V - P)[0, 0][P[0, 0] > 0]
    assert np.ptp(d) < 1e-10


@given(joints(3, 4), st.floats(0.1, 0.9))
def test_reduced_costs_vanish_on_basis_and_are_nonnegative(j, frac):
    prob = S.Problem(j.pxy)
    eps = frac * mutual_information_matrix(j.pxy)
    Q = S.initial_pool(prob, np.random.default_rng(0), max_points=300)
    sol = S.solve_pool(prob, Q, "mi", eps)
    assert sol is not None
    d, _ = S._reduced_cost_and_grad(prob, Q, sol, "mi")
    basic = sol.weights > 1e-9
    np.testing.assert_allclose(d[basic], 0.0, atol=1e-7)
    assert d.min() >= -1e-7


@given(joints(3, 4), st.floats(0.1, 0.9))
def test_pool_lp_value_is_a_feasible_filter(j, frac):
    prob = S.Problem(j.pxy)
    eps = frac * mutual_information_matrix(j.pxy)
    Q = S.initial_pool(prob, np.random.default_rng(1), max_points=300)
    sol = S.solve_pool(prob, Q, "mi", eps)
    w = S.reduce_support(prob, sol.pool, sol.weights, "mi")
    W = S.filter_from_weights(prob, sol.pool, w)
    np.testing.assert_allclose(W.sum(1), 1.0, atol=1e-9)
    i_xz, i_yz, _ = leakage(j.pxy, W)
    assert i_xz <= eps + 1e-9
    assert i_yz == pytest.approx(sol.value, abs=1e-8)
    assert np.count_nonzero(w > 1e-13) <= prob.ny + 1


def test_perfect_privacy_vertices_keep_px(rng):
    pxy = rng.dirichlet(np.ones(8)).reshape(2, 4)
    prob = S.Problem(pxy)
    V = S.perfect_privacy_vertices(prob, rng)
    np.testing.assert_allclose(prob.A @ V, np.repeat(prob.px[:, None], V.shape[1], 1), atol=1e-10)
    assert np.all(V >= -1e-12)
    # every vertex has at most |X| nonzeros
    assert np.all(np.count_nonzero(V > 1e-12, axis=0) <= prob.nx)
