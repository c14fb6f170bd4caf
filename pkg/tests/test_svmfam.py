import numpy as np
import pytest

from conftest import blobs
from oracles import gauss_solve, grid_refine_qp
from twinbench.data import Dataset, standardize, stratified_kfold
from twinbench.kernels import KernelSpec
from twinbench.svmfam import (Hyperplane, TwinClassifier, predict_twin, train_lstsvm, train_pingtsvm,
                              train_relstsvm, train_svm, train_tbsvm, train_twsvm)

LIN = KernelSpec.linear()


def _small(seed, n1, n2, d=2):
    r = np.random.default_rng(seed)
    X = np.vstack([r.normal(1.0, 1.0, (n1, d)), r.normal(-1.0, 1.0, (n2, d))])
    return Dataset(X, np.r_[np.ones(n1), -np.ones(n2)])


def _aug(X):
    return np.hstack([X, np.ones((X.shape[0], 1))])


def _dual_matrix(own, other, ridge):
    # other (own'own + ridge I)^-1 other', column by column with the naive solver
    A = own.T @ own + ridge * np.eye(own.shape[1])
    Z = np.column_stack([gauss_solve(A, col) for col in other])
    return other @ Z


# --- TWSVM / TBSVM ----------------------------------------------------------------

def test_twsvm_plane_passes_through_own_class():
    x = np.linspace(-2, 2, 6)
    X = np.vstack([np.c_[x, np.zeros(6)], np.c_[x + 0.2, np.ones(6)]])
    ds = Dataset(X, np.r_[np.ones(6), -np.ones(6)])
    m = train_twsvm(ds, 1.0, 1.0, LIN)
    f1, _ = m.decision(X[:6])
    assert np.max(np.abs(f1)) / np.linalg.norm(m.plane1.w) <= 1e-3


def test_twsvm_duals_respect_box_for_small_penalties():
    ds = _small(0, 10, 10)
    m = train_twsvm(ds, 1e-5, 1e-5, LIN)
    for key, c in (("alpha", 1e-5), ("gamma", 1e-5)):
        a = m.info[key]
        assert np.all(a >= 0) and np.all(a <= c)


@pytest.mark.parametrize("seed", range(3))
def test_twsvm_dual_objective_matches_grid_oracle(seed):
    ds = _small(seed, 4, 4)
    c1, c2 = 0.8, 1.5
    m = train_twsvm(ds, c1, c2, LIN)
    H, G = _aug(ds.X[ds.y == 1]), _aug(ds.X[ds.y == -1])
    for (own, other, c), obj in zip(((H, G, c1), (G, H, c2)), m.info["dual_objectives"]):
        _, f_ref = grid_refine_qp(_dual_matrix(own, other, 1e-7), np.ones(4), np.zeros(4), np.full(4, c))
        assert obj == pytest.approx(f_ref, abs=1e-6)


@pytest.mark.parametrize("seed", range(2))
def test_tbsvm_dual_objective_matches_grid_oracle(seed):
    ds = _small(10 + seed, 4, 4)
    m = train_tbsvm(ds, 1.0, 0.5, 2.0, 0.25, LIN)
    H, G = _aug(ds.X[ds.y == 1]), _aug(ds.X[ds.y == -1])
    for (own, other, c, ridge), obj in zip(((H, G, 1.0, 0.5), (G, H, 2.0, 0.25)), m.info["dual_objectives"]):
        _, f_ref = grid_refine_qp(_dual_matrix(own, other, ridge), np.ones(4), np.zeros(4), np.full(4, c))
        assert obj == pytest.approx(f_ref, abs=1e-6)


@pytest.mark.parametrize("kernel", [LIN, KernelSpec.gaussian(0.5)])
def test_tbsvm_without_regularizer_is_twsvm(kernel):
    ds = _small(3, 15, 12, d=4)
    a = train_tbsvm(ds, 2.0, 0.0, 3.0, 0.0, kernel)
    b = train_twsvm(ds, 2.0, 3.0, kernel)
    np.testing.assert_allclose(a.plane1.v, b.plane1.v, atol=1e-8)
    np.testing.assert_allclose(a.plane2.v, b.plane2.v, atol=1e-8)
    np.testing.assert_array_equal(a.predict(ds.X)[0], b.predict(ds.X)[0])


def test_tbsvm_weight_norm_shrinks_with_regularizer():
    ds = _small(4, 20, 20, d=3)
    norms = [np.linalg.norm(train_tbsvm(ds, 1.0, c2, 1.0, c2, LIN).plane1.w) for c2 in (1.0, 10.0, 100.0)]
    assert norms[0] > norms[1] > norms[2]


# --- LSTSVM / RELSTSVM -------------------------------------------------------------

def test_lstsvm_hand_solved_two_points():
    # H = [0 1], G = [1 1]: (G'G + H'H) = [[1,1],[1,2]], whose inverse is [[2,-1],[-1,1]]
    ds = Dataset(np.array([[0.0], [1.0]]), [1, -1])
    m = train_lstsvm(ds, 1.0, 1.0, LIN)
    np.testing.assert_allclose(m.plane1.v, [-1.0, 0.0], atol=1e-6)
    np.testing.assert_allclose(m.plane2.v, [-1.0, 1.0], atol=1e-6)


def test_lstsvm_mirror_symmetry():
    X1 = np.array([[1.0, 0.5], [2.0, 1.5], [1.5, -0.5], [0.7, 0.9]])
    ds = Dataset(np.vstack([X1, -X1]), np.r_[np.ones(4), -np.ones(4)])
    m = train_lstsvm(ds, 0.7, 0.7, LIN)
    # reflecting x -> -x swaps the classes, so plane 2 is plane 1 reflected:
    # {w.x + b = 0} -> {w.x - b = 0}
    np.testing.assert_allclose(m.plane2.w, m.plane1.w, atol=1e-8)
    assert m.plane2.b == pytest.approx(-m.plane1.b, abs=1e-8)


@pytest.mark.parametrize("kernel", [LIN, KernelSpec.gaussian(0.25)])
def test_relstsvm_reduces_to_lstsvm(kernel):
    ds = _small(5, 12, 17, d=3)
    a = train_relstsvm(ds, 0.3, 0.0, 4.0, 0.0, 1.0, 1.0, kernel)
    b = train_lstsvm(ds, 0.3, 4.0, kernel)
    np.testing.assert_allclose(a.plane1.v, b.plane1.v, atol=1e-8)
    np.testing.assert_allclose(a.plane2.v, b.plane2.v, atol=1e-8)


def test_relstsvm_linear_in_energy():
    ds = _small(6, 10, 10, d=3)
    full = train_relstsvm(ds, 2.0, 0.0, 2.0, 0.0, 1.0, 1.0, LIN)
    half = train_relstsvm(ds, 2.0, 0.0, 2.0, 0.0, 0.5, 1.0, LIN)
    np.testing.assert_allclose(half.plane1.v, 0.5 * full.plane1.v, rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(half.plane2.v, full.plane2.v, rtol=1e-12)


@pytest.mark.parametrize("kernel", [LIN, KernelSpec.gaussian(1.0)])
def test_closed_form_residuals(rng, kernel):
    ds = _small(int(rng.integers(1000)), 9, 11, d=4)
    E1 = rng.uniform(0.5, 1.0, 11)
    m = train_relstsvm(ds, 0.5, 0.1, 2.0, 0.3, E1, 0.8, kernel)
    for A, rhs in m.info["systems"]:
        u = gauss_solve(A, rhs)
        assert np.max(np.abs(A @ u - rhs)) <= 1e-8
    (A1, r1), (A2, r2) = m.info["systems"]
    assert np.max(np.abs(A1 @ -m.plane1.v - r1)) <= 1e-8
    assert np.max(np.abs(A2 @ m.plane2.v - r2)) <= 1e-8


def test_relstsvm_closed_form_matches_unscaled_formula():
    ds = _small(8, 6, 7, d=2)
    c1, c2, c3, c4, E = 3.0, 0.5, 2.0, 0.2, 0.7
    m = train_relstsvm(ds, c1, c2, c3, c4, E, E, LIN)
    P, Q = _aug(ds.X[ds.y == 1]), _aug(ds.X[ds.y == -1])
    v1 = -gauss_solve(c1 * Q.T @ Q + P.T @ P + c2 * np.eye(3), c1 * Q.T @ np.full(7, E))
    v2 = gauss_solve(c3 * P.T @ P + Q.T @ Q + c4 * np.eye(3), c3 * P.T @ np.full(6, E))
    # the implementation adds a 1e-7 ridge after dividing through by c
    np.testing.assert_allclose(m.plane1.v, v1, atol=1e-5)
    np.testing.assert_allclose(m.plane2.v, v2, atol=1e-5)


def test_relstsvm_rejects_bad_energy():
    with pytest.raises(ValueError):
        train_relstsvm(_small(0, 3, 3), E1=0.0)
    with pytest.raises(ValueError):
        train_relstsvm(_small(0, 3, 3), E2=1.5)


# --- pinGTSVM ----------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(3))
def test_pingtsvm_tau_zero_matches_nonnegative_oracle(seed):
    ds = _small(20 + seed, 3, 3)
    m = train_pingtsvm(ds, 1.0, 1.0, 0.0, 0.0, LIN)
    H, G = _aug(ds.X[ds.y == 1]), _aug(ds.X[ds.y == -1])
    for (own, other), sol, obj in zip(((H, G), (G, H)), (m.info["s"], m.info["t"]), m.info["dual_objectives"]):
        assert np.all(sol >= 0)
        hi = 4 * max(1.0, sol.max())
        _, f_ref = grid_refine_qp(_dual_matrix(own, other, 1e-7), np.ones(3), np.zeros(3), np.full(3, hi))
        assert obj == pytest.approx(f_ref, abs=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_pingtsvm_bounds_and_grid_oracle(seed):
    ds = _small(30 + seed, 3, 3)
    c1, c2, t1, t2 = 2.0, 0.5, 0.3, 0.6
    m = train_pingtsvm(ds, c1, c2, t1, t2, LIN)
    s, t = m.info["s"], m.info["t"]
    assert np.all(s >= -t2 * c1 - 1e-12) and np.all(t >= -t1 * c2 - 1e-12)
    H, G = _aug(ds.X[ds.y == 1]), _aug(ds.X[ds.y == -1])
    hi = 4 * max(1.0, s.max())
    _, f_ref = grid_refine_qp(_dual_matrix(H, G, 1e-7), np.ones(3), np.full(3, -t2 * c1), np.full(3, hi))
    assert m.info["dual_objectives"][0] == pytest.approx(f_ref, abs=1e-6)


def test_pingtsvm_validation():
    with pytest.raises(ValueError):
        train_pingtsvm(_small(0, 3, 3), tau1=1.5)
    with pytest.raises(ValueError):
        train_pingtsvm(_small(0, 3, 3), c1=0.0)


# --- prediction --------------------------------------------------------------------

def _manual(w1, b1, w2, b2):
    return TwinClassifier(Hyperplane(np.array(w1, float), b1), Hyperplane(np.array(w2, float), b2),
                          LIN, np.empty((0, len(w1))))


def test_predict_twin_on_plane_and_tie():
    m = _manual([1.0, 0.0], 0.0, [1.0, 0.0], -2.0)
    labels, scores = predict_twin(m, np.array([[0.0, 5.0], [1.0, 0.0], [2.0, 1.0]]))
    np.testing.assert_array_equal(labels, [1, 1, -1])
    np.testing.assert_allclose(scores, [2.0, 0.0, -2.0])


def test_predict_twin_scale_invariant_ranking(rng):
    m = _manual([1.0, -0.5], 0.3, [0.2, 1.0], -0.1)
    s = _manual([3.0, -1.5], 0.9, [0.6, 3.0], -0.3)
    X = rng.normal(size=(40, 2))
    la, sa = predict_twin(m, X)
    lb, sb = predict_twin(s, X)
    np.testing.assert_array_equal(la, lb)
    np.testing.assert_array_equal(np.argsort(sa, kind="stable"), np.argsort(sb, kind="stable"))


def test_predict_dimension_mismatch():
    m = _manual([1.0, 0.0], 0.0, [0.0, 1.0], 0.0)
    with pytest.raises(ValueError):
        predict_twin(m, np.ones((2, 3)))


# --- SVM ---------------------------------------------------------------------------

def test_svm_one_dimensional_margin():
    m = train_svm(Dataset(np.array([[-1.0], [1.0]]), [-1, 1]), 1e4, LIN)
    labels, _ = m.predict(np.array([[0.5], [-0.5]]))
    np.testing.assert_array_equal(labels, [1, -1])


def test_svm_rejects_zero_penalty():
    with pytest.raises(ValueError):
        train_svm(_small(0, 3, 3), 0.0)


def test_svm_dual_box(separable):
    m = train_svm(separable, 0.5, LIN)
    assert np.all(m.alpha > 0) and np.all(m.alpha <= 0.5)


def test_svm_linear_kernel_matches_explicit_plane(separable):
    m = train_svm(separable, 10.0, LIN)
    w = (m.alpha * m.labels) @ m.points
    b = np.sum(m.alpha * m.labels)
    explicit = np.where(separable.X @ w + b >= 0, 1, -1)
    np.testing.assert_array_equal(m.predict(separable.X)[0], explicit)
    assert np.mean(explicit == separable.y) == 1.0


TRAINERS = {
    "svm": lambda ds: train_svm(ds, 1.0, LIN),
    "twsvm": lambda ds: train_twsvm(ds, 1.0, 1.0, LIN),
    "tbsvm": lambda ds: train_tbsvm(ds, 1.0, 1.0, 1.0, 1.0, LIN),
    "lstsvm": lambda ds: train_lstsvm(ds, 1.0, 1.0, LIN),
    "relstsvm": lambda ds: train_relstsvm(ds, 1.0, 1.0, 1.0, 1.0, 0.8, 0.8, LIN),
    "pingtsvm": lambda ds: train_pingtsvm(ds, 1.0, 1.0, 0.05, 0.05, LIN),
}


@pytest.mark.parametrize("name", sorted(TRAINERS))
def test_trainers_fit_separable_data(name, separable):
    m = TRAINERS[name](separable)
    assert np.mean(m.predict(separable.X)[0] == separable.y) == 1.0


@pytest.mark.parametrize("name", sorted(TRAINERS))
def test_trainers_ten_fold_accuracy_on_blobs(name):
    ds = blobs(100, 10, 1.0, seed=1)
    plan = stratified_kfold(ds, 10, seed=0)
    correct = 0
    for train, test in plan:
        tr, te = standardize(ds.rows(train), ds.rows(test))
        correct += np.sum(TRAINERS[name](tr).predict(te.X)[0] == te.y)
    assert correct / ds.n >= 0.95


def test_gaussian_twin_models_predict_reference_shape(separable):
    m = train_twsvm(separable, 1.0, 1.0, KernelSpec.gaussian(0.1))
    assert m.kernelized and m.reference.shape == separable.X.shape
    assert np.mean(m.predict(separable.X)[0] == separable.y) >= 0.95
