import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import blobs
from oracles import brute_knn, coordinate_descent_l1, gauss_solve
from twinbench.data import Dataset
from twinbench.kernels import KernelSpec
from twinbench.numkit import l1_objective
from twinbench.shallow import (KnnModel, predict_knn, ridge_output_weights, train_krr, train_mlp, train_rvfl,
                               train_rvfl_ae)


# --- KRR -------------------------------------------------------------------------------

def test_krr_single_point():
    m = train_krr(Dataset(np.array([[0.3, 0.1]]), [1]), 1.0, KernelSpec.gaussian(1.0))
    assert m.decision(np.array([[0.3, 0.1]]))[0] == pytest.approx(0.5)


def test_krr_interpolates_without_ridge(rng):
    X = rng.normal(size=(12, 3))
    y = np.where(rng.random(12) < 0.5, 1, -1)
    y[:2] = (1, -1)
    m = train_krr(Dataset(X, y), 0.0, KernelSpec.gaussian(0.5))
    np.testing.assert_allclose(m.decision(X), y, atol=1e-6)


def test_krr_huge_ridge_shrinks_to_zero(separable):
    m = train_krr(separable, 1e9, KernelSpec.gaussian(0.1))
    assert np.max(np.abs(m.decision(separable.X))) <= 1e-6


def test_krr_linear_kernel_is_ridge_regression(rng):
    X = rng.normal(size=(30, 4))
    y = np.where(X[:, 0] + 0.3 * rng.normal(size=30) > 0, 1.0, -1.0)
    lam = 0.7
    m = train_krr(Dataset(X, y), lam, KernelSpec.linear())
    w_kernel = X.T @ m.coefficients
    w_ridge = gauss_solve(X.T @ X + lam * np.eye(4), X.T @ y)
    np.testing.assert_allclose(w_kernel, w_ridge, atol=1e-8)
    Q = rng.normal(size=(7, 4))
    np.testing.assert_allclose(m.decision(Q), Q @ w_ridge, atol=1e-8)


def test_krr_validation():
    with pytest.raises(ValueError):
        train_krr(blobs(10, 2), -1.0)


# --- KNN -------------------------------------------------------------------------------

def test_knn_duplicated_training_point():
    X = np.vstack([np.tile([[1.0, 1.0]], (5, 1)), [[9.0, 9.0], [8.0, 9.0]]])
    ds = Dataset(X, [1, 1, 1, 1, 1, -1, -1])
    assert predict_knn(ds, np.array([[1.0, 1.0]]), 5)[0] == 1


def test_knn_one_neighbour():
    ds = Dataset(np.array([[0.0], [1.0], [5.0]]), [1, -1, -1])
    np.testing.assert_array_equal(predict_knn(ds, np.array([[0.2], [0.9], [4.0]]), 1), [1, -1, -1])


def test_knn_matches_brute_force_oracle(rng):
    X = rng.normal(size=(10, 2))
    y = np.r_[np.ones(5), -np.ones(5)].astype(int)
    ds = Dataset(X, y)
    Q = rng.normal(size=(20, 2))
    got = predict_knn(ds, Q, 5)
    want = [brute_knn(X, y, q, 5) for q in Q]
    np.testing.assert_array_equal(got, want)


def test_knn_rejects_even_and_oversized_k():
    ds = blobs(10, 2)
    with pytest.raises(ValueError):
        predict_knn(ds, ds.X, 4)
    with pytest.raises(ValueError):
        predict_knn(ds, ds.X, 11)


def test_knn_scores_are_patient_fraction(separable):
    labels, scores = KnnModel(separable, 5).predict(separable.X)
    assert np.all(np.isin(scores, np.arange(6) / 5))
    np.testing.assert_array_equal(labels, np.where(scores > 0.5, 1, -1))


# --- MLP -------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def mlp_fit():
    ds = blobs(100, 5, 2.0, seed=3)
    return ds, train_mlp(ds, hidden=32, epochs=60, lr=1e-2, seed=0)


def test_mlp_loss_decreases_early(mlp_fit):
    _, m = mlp_fit
    h = m.history["train_loss"]
    assert h[9] < h[0]


def test_mlp_fits_separable_blobs(mlp_fit):
    ds, m = mlp_fit
    assert np.mean(m.predict(ds.X)[0] == ds.y) >= 0.99


def test_mlp_softmax_sums_to_one(mlp_fit, rng):
    _, m = mlp_fit
    P = m.proba(rng.normal(size=(50, 5)) * 10)
    np.testing.assert_allclose(P.sum(1), 1.0, atol=1e-6)


def test_mlp_batch_size_invariant(mlp_fit):
    ds, m = mlp_fit
    batch = m.proba(ds.X)
    single = np.vstack([m.proba(ds.X[i:i + 1]) for i in range(ds.n)])
    np.testing.assert_allclose(single, batch, rtol=0, atol=1e-15)


def test_mlp_deterministic():
    ds = blobs(40, 3, 1.0, seed=8)
    a = train_mlp(ds, hidden=8, epochs=5, seed=4)
    b = train_mlp(ds, hidden=8, epochs=5, seed=4)
    for k in ("W1", "b1", "gamma", "beta", "W2", "b2", "running_mean", "running_var"):
        np.testing.assert_array_equal(getattr(a, k), getattr(b, k))


def test_mlp_non_finite_loss_aborts():
    ds = blobs(40, 3, 1.0, seed=8)
    X = np.array(ds.X)
    X[:, 1] = np.inf
    with pytest.raises(FloatingPointError, match="non-finite"), np.errstate(all="ignore"):
        train_mlp(ds.with_X(X), hidden=4, epochs=2, seed=0)


def test_mlp_validation():
    with pytest.raises(ValueError):
        train_mlp(blobs(20, 2), hidden=0)


# --- RVFL ------------------------------------------------------------------------------

def test_rvfl_direct_only_is_ridge(rng):
    ds = blobs(40, 6, 0.5, seed=5)
    m = train_rvfl(ds, N=10, C_exp=-2, seed=0, direct_only=True)
    beta = gauss_solve(ds.X.T @ ds.X + 0.25 * np.eye(6), ds.X.T @ ds.y)
    np.testing.assert_allclose(m.beta, beta, atol=1e-8)


def test_rvfl_wide_design_uses_dual_identity(rng):
    D = rng.normal(size=(8, 20))
    y = rng.normal(size=8)
    beta = ridge_output_weights(D, y, 0.3)
    np.testing.assert_allclose(beta, gauss_solve(D.T @ D + 0.3 * np.eye(20), D.T @ y), atol=1e-8)
    with pytest.raises(ValueError):
        ridge_output_weights(D, y, 0.0)


def test_rvfl_seeded_and_bounded():
    ds = blobs(50, 4, 1.0, seed=2)
    a = train_rvfl(ds, N=23, C_exp=3, S=0.5, seed=9)
    b = train_rvfl(ds, N=23, C_exp=3, S=0.5, seed=9)
    np.testing.assert_array_equal(a.beta, b.beta)
    assert np.all(np.abs(a.W_in) <= 0.5) and np.all(np.abs(a.b_in) <= 0.5)
    assert a.design(ds.X).shape == (50, 27)


def test_rvfl_huge_ridge_shrinks_weights():
    ds = blobs(50, 4, 1.0, seed=2)
    norms = [np.linalg.norm(train_rvfl(ds, N=20, C_exp=c, seed=0).beta) for c in (0, 20, 40)]
    assert norms[0] > norms[1] > norms[2] and norms[2] < 1e-9


def test_rvfl_fits_separable(separable):
    m = train_rvfl(separable, N=43, C_exp=-3, seed=1)
    assert np.mean(m.predict(separable.X)[0] == separable.y) == 1.0


def _hidden_map(ds, N, S, seed):
    r = np.random.default_rng(seed)
    W = r.uniform(-S, S, size=(ds.d, N))
    b = r.uniform(-S, S, size=N)
    return 1.0 / (1.0 + np.exp(-(ds.X @ W + b)))


def test_rvfl_ae_unregularized_is_least_squares():
    ds = blobs(40, 3, 1.0, seed=4)
    m = train_rvfl_ae(ds, N=4, C_exp=0, l1=0.0, seed=7, max_iter=200000)
    H = _hidden_map(ds, 4, 1.0, 7)
    omega = np.linalg.lstsq(H, ds.X, rcond=None)[0]
    assert m.pretrained
    np.testing.assert_allclose(m.W_in.T, omega, atol=1e-4)


def test_rvfl_ae_large_l1_is_sparse_and_matches_oracle():
    ds = blobs(40, 3, 1.0, seed=4)
    H = _hidden_map(ds, 12, 1.0, 2)
    for l1 in (1.0, 4.0, 16.0, 64.0):
        m = train_rvfl_ae(ds, N=12, C_exp=0, l1=l1, seed=2, max_iter=20000)
        if np.mean(np.abs(m.W_in) < 1e-8) >= 0.5:
            break
    assert np.mean(np.abs(m.W_in) < 1e-8) >= 0.5
    for j in range(ds.d):
        ref = coordinate_descent_l1(H, ds.X[:, j], l1)
        assert l1_objective(H, ds.X[:, j], m.W_in[j], l1) == pytest.approx(
            l1_objective(H, ds.X[:, j], ref, l1), abs=1e-5)


def test_rvfl_ae_deterministic():
    ds = blobs(30, 3, 1.0, seed=1)
    a = train_rvfl_ae(ds, N=6, l1=0.1, seed=3)
    b = train_rvfl_ae(ds, N=6, l1=0.1, seed=3)
    np.testing.assert_array_equal(a.predict(ds.X)[1], b.predict(ds.X)[1])


@given(st.integers(0, 10 ** 6))
def test_all_models_emit_valid_labels(seed):
    ds = blobs(30, 3, 0.5, seed=seed % 1000)
    Q = np.random.default_rng(seed).normal(size=(5, 3)) * 3
    for m in (train_krr(ds, 1.0, KernelSpec.gaussian(0.5)), KnnModel(ds, 3), train_rvfl(ds, N=5, seed=seed)):
        labels, scores = m.predict(Q)
        assert np.all(np.isin(labels, (1, -1))) and np.all(np.isfinite(scores))
