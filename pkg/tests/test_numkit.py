import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import coordinate_descent_l1, det_roots, gauss_solve, grid_refine_qp
from twinbench.numkit import (BoxQp, QpUnbounded, SolverWarning, fista_l1, jacobi_eigh, l1_objective,
                              min_gen_eigenpair, projected_gradient_norm, solve_box_qp, solve_spd)


# --- solve_spd ---------------------------------------------------------------

def test_solve_spd_identity():
    np.testing.assert_array_equal(solve_spd(np.eye(2), [3.0, 4.0]), [3.0, 4.0])


def test_solve_spd_diagonal():
    np.testing.assert_allclose(solve_spd(np.diag([2.0, 4.0]), [2.0, 4.0]), [1.0, 1.0])


def test_solve_spd_matches_gaussian_elimination(rng):
    for _ in range(20):
        R = rng.normal(size=(6, 6))
        A = R @ R.T + 0.5 * np.eye(6)
        b = rng.normal(size=6)
        x = solve_spd(A, b)
        np.testing.assert_allclose(x, gauss_solve(A, b), atol=1e-8)
        assert np.max(np.abs(A @ x - b)) <= 1e-8 * (1 + np.max(np.abs(b)))


def test_solve_spd_singular_falls_back_to_ridge():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.warns(SolverWarning):
        x, used = solve_spd(A, [1.0, 1.0], full_output=True)
    assert used
    np.testing.assert_allclose((A + 1e-7 * np.eye(2)) @ x, [1.0, 1.0], atol=1e-8)


def test_solve_spd_rejects_bad_input():
    with pytest.raises(ValueError):
        solve_spd(np.eye(2), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        solve_spd(np.array([[1.0, np.nan], [0.0, 1.0]]), [1.0, 1.0])


# --- solve_box_qp ------------------------------------------------------------

def test_box_qp_interior_optimum():
    s = solve_box_qp(BoxQp(np.array([[2.0]]), np.array([1.0]), 0.0, 10.0))
    assert s.converged
    assert s.x[0] == pytest.approx(0.5, abs=1e-9)


def test_box_qp_clipped_at_bound():
    s = solve_box_qp(BoxQp(np.array([[2.0]]), np.array([1.0]), 0.0, 0.3))
    assert s.x[0] == pytest.approx(0.3, abs=1e-12)


def test_box_qp_matches_grid_refinement(rng):
    for _ in range(25):
        A = rng.normal(size=(5, 5))
        M = A.T @ A + 0.1 * np.eye(5)
        q = 3 * rng.normal(size=5)
        lo, hi = -rng.uniform(0, 2, 5), rng.uniform(0, 2, 5)
        s = solve_box_qp(BoxQp(M, q, lo, hi))
        _, f_ref = grid_refine_qp(M, q, lo, hi)
        assert abs(s.objective - f_ref) <= 1e-6


def test_box_qp_one_sided_bounds(rng):
    A = rng.normal(size=(4, 4))
    M = A.T @ A + np.eye(4)
    q = rng.normal(size=4)
    s = solve_box_qp(BoxQp(M, q, -0.1, np.inf))
    assert s.converged and np.all(s.x >= -0.1 - 1e-12)
    # KKT: free coordinates have zero gradient, clamped ones a non-negative one
    g = M @ s.x - q
    free = s.x > -0.1 + 1e-9
    assert np.all(np.abs(g[free]) <= 1e-6)
    assert np.all(g[~free] >= -1e-6)


def test_box_qp_unbounded_direction_detected():
    # zero curvature along x, linear term pulls to +inf
    with pytest.raises(QpUnbounded):
        solve_box_qp(BoxQp(np.zeros((1, 1)), np.array([1.0]), 0.0, np.inf))


def test_box_qp_rejects_invalid_problems():
    with pytest.raises(ValueError):
        BoxQp(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2), 0, 1)
    with pytest.raises(ValueError):
        BoxQp(np.eye(2), np.zeros(2), 1.0, 0.0)


def test_box_qp_budget_exhausted_returns_best_iterate(rng):
    A = rng.normal(size=(30, 30))
    M = A.T @ A
    q = rng.normal(size=30) * 10
    s = solve_box_qp(BoxQp(M, q, -1, 1), tol=1e-300, max_iter=3)
    assert not s.converged
    assert np.all(s.x >= -1) and np.all(s.x <= 1)


@given(st.integers(0, 10_000), st.integers(1, 7))
def test_box_qp_properties(seed, n):
    r = np.random.default_rng(seed)
    A = r.normal(size=(n, n))
    M = A.T @ A  # PSD, possibly singular
    q = r.normal(size=n) * 3
    lo, hi = -r.uniform(0.1, 3, n), r.uniform(0.1, 3, n)
    p = BoxQp(M, q, lo, hi)
    s = solve_box_qp(p)
    assert np.all(s.x >= lo - 1e-12) and np.all(s.x <= hi + 1e-12)
    assert projected_gradient_norm(p, s.x) <= 1e-6
    # convexity probe: no random feasible point does better by more than tol
    Y = r.uniform(lo, hi, size=(50, n))
    fy = 0.5 * np.einsum("ij,jk,ik->i", Y, M, Y) - Y @ q
    assert s.objective <= fy.min() + 1e-6


def test_box_qp_ill_conditioned_svm_dual_converges(rng):
    # rank-deficient Gram matrix with a wide box: the active-set polish must finish
    X = rng.normal(size=(80, 3))
    y = np.where(X[:, 0] + 0.3 * rng.normal(size=80) > 0, 1.0, -1.0)
    K = (X @ X.T + 1.0) * np.outer(y, y)
    for C in (1.0, 1e4):
        s = solve_box_qp(BoxQp(K, np.ones(80), 0.0, C))
        assert s.converged and s.iterations < 1000


# --- eigenproblems -------------------------------------------------------------

def test_min_gen_eigenpair_identity_pair():
    lam, v = min_gen_eigenpair(np.eye(3), np.eye(3))
    assert lam == pytest.approx(1.0)
    assert np.linalg.norm(v) == pytest.approx(1.0)


def test_min_gen_eigenpair_diagonal():
    lam, v = min_gen_eigenpair(np.diag([1.0, 4.0]), np.eye(2))
    assert lam == pytest.approx(1.0)
    assert abs(v[0]) == pytest.approx(1.0) and abs(v[1]) < 1e-12


def test_min_gen_eigenpair_matches_root_bracketing(rng):
    for _ in range(5):
        R = rng.normal(size=(4, 4))
        S = rng.normal(size=(4, 4))
        A = R @ R.T + 0.1 * np.eye(4)
        B = S @ S.T + 0.5 * np.eye(4)
        lam, v = min_gen_eigenpair(A, B)
        assert np.linalg.norm(A @ v - lam * B @ v) <= 1e-7
        roots = det_roots(A, B, lo=0.0, hi=max(50.0, 2 * lam))
        assert lam == pytest.approx(min(roots), abs=1e-7)


def test_min_gen_eigenpair_ridge_and_errors(rng):
    A = np.diag([0.0, 1.0])
    B = np.diag([1.0, 0.0])
    with pytest.raises(ValueError):
        min_gen_eigenpair(A, B)
    lam, v = min_gen_eigenpair(A, B, ridge=0.5)
    Ar, Br = A + 0.5 * np.eye(2), B + 0.5 * np.eye(2)
    assert np.linalg.norm(Ar @ v - lam * Br @ v) <= 1e-7


@given(st.integers(0, 10_000), st.integers(1, 9))
def test_jacobi_matches_dense_eigensolver(seed, n):
    r = np.random.default_rng(seed)
    S = r.normal(size=(n, n))
    S = S + S.T
    w, V = jacobi_eigh(S)
    np.testing.assert_allclose(w, np.linalg.eigvalsh(S), atol=1e-9 * max(1, np.abs(S).max()))
    np.testing.assert_allclose(V.T @ V, np.eye(n), atol=1e-10)
    np.testing.assert_allclose(S @ V, V * w, atol=1e-9 * max(1, np.abs(S).max()))


# --- FISTA -----------------------------------------------------------------------

def test_fista_unregularized_identity():
    B = np.array([[1.0, -2.0], [3.0, 0.5]])
    np.testing.assert_allclose(fista_l1(np.eye(2), B, 0.0), B, atol=1e-8)


def test_fista_one_dimensional_soft_threshold():
    # ||w - 3||^2 + 2|w|  ->  sign(b) max(|b| - lam/2, 0) = 2
    w = fista_l1(np.eye(1), np.array([3.0]), 2.0)
    assert w[0] == pytest.approx(2.0, abs=1e-8)
    assert fista_l1(np.eye(1), np.array([0.5]), 2.0)[0] == pytest.approx(0.0, abs=1e-12)


def test_fista_matches_coordinate_descent(rng):
    A = rng.normal(size=(10, 5))
    b = rng.normal(size=10)
    lam = 1.5
    w = fista_l1(A, b, lam, max_iter=20000)
    w_ref = coordinate_descent_l1(A, b, lam)
    assert l1_objective(A, b, w, lam) == pytest.approx(l1_objective(A, b, w_ref, lam), abs=1e-5)


def test_fista_objective_non_increasing_and_least_squares_limit(rng):
    A = rng.normal(size=(20, 6))
    B = rng.normal(size=(20, 3))
    _, info = fista_l1(A, B, 0.7, full_output=True)
    h = np.array(info["history"])
    assert np.all(np.diff(h) <= 1e-12 * np.abs(h[:-1]).max())
    W = fista_l1(A, B, 0.0, max_iter=50000, tol=1e-14)
    np.testing.assert_allclose(W, np.linalg.lstsq(A, B, rcond=None)[0], atol=1e-6)


def test_fista_warns_when_budget_exhausted(rng):
    A = rng.normal(size=(30, 20))
    B = rng.normal(size=(30, 2))
    with pytest.warns(SolverWarning):
        fista_l1(A, B, 1e-3, max_iter=2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        _, info = fista_l1(A, B, 1e-3, max_iter=2, full_output=True, warn=False)
    assert not info["converged"]


def test_fista_dimension_mismatch():
    with pytest.raises(ValueError):
        fista_l1(np.eye(3), np.ones(2), 0.1)
