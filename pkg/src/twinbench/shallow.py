"""Kernel ridge regression, k-nearest neighbours, a one-hidden-layer MLP
trained with Adam, and random vector functional link networks (plain and
with an l1 sparse-autoencoder pretraining of the hidden weights).

Every model labels with +1 (patient) / -1 (control) and exposes a real score
that grows with patient-likeness, used for AUC.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .data import CONTROL, PATIENT, Dataset
from .kernels import KernelSpec, gram
from .numkit import fista_l1, solve_spd


def _sign_labels(scores):
    return np.where(scores >= 0, PATIENT, CONTROL)


def _as_matrix(X, d):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != d:
        raise ValueError(f"expected {d} features, got {X.shape[1]}")
    return X


# ---------------------------------------------------------------------------
# Kernel ridge regression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KrrModel:
    coefficients: np.ndarray
    train_points: np.ndarray
    kernel: KernelSpec
    lam: float
    ridge_fallback: bool = False

    def decision(self, X):
        X = _as_matrix(X, self.train_points.shape[1])
        return gram(X, self.train_points, self.kernel) @ self.coefficients

    def predict(self, X):
        f = self.decision(X)
        return _sign_labels(f), f


def train_krr(ds: Dataset, lam=1.0, kernel=KernelSpec()) -> KrrModel:
    """Solve ``(K + lam I) c = y``; the score at ``x`` is ``sum_i c_i k(x_i, x)``.

    With ``lam = 0`` and a singular ``K`` the ridge fallback of
    :func:`~twinbench.numkit.solve_spd` is used and flagged.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    K = gram(ds.X, ds.X, kernel)
    c, used = solve_spd(K + lam * np.eye(ds.n), ds.y.astype(float), full_output=True, warn=False)
    return KrrModel(c, np.array(ds.X), kernel, float(lam), used)


# ---------------------------------------------------------------------------
# k-nearest neighbours
# ---------------------------------------------------------------------------

def _exact_sq_dists(Q, T, chunk=64):
    out = np.empty((Q.shape[0], T.shape[0]))
    for s in range(0, Q.shape[0], chunk):
        diff = Q[s:s + chunk, None, :] - T[None, :, :]
        out[s:s + chunk] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def knn_neighbours(ds: Dataset, X, k=5):
    """Indices of the ``k`` nearest training points of every query row.

    Distances are Euclidean; equal distances keep training-index order.
    """
    if k < 1 or k > ds.n:
        raise ValueError(f"k must lie in [1, {ds.n}]")
    X = _as_matrix(X, ds.d)
    D = _exact_sq_dists(X, ds.X)
    return np.argsort(D, axis=1, kind="stable")[:, :k]


def predict_knn(ds: Dataset, X, k=5, return_scores=False):
    """Majority vote of the ``k`` nearest neighbours (``k`` odd).

    With ``return_scores`` also return the fraction of patient neighbours.
    """
    if k % 2 == 0:
        raise ValueError("k must be odd")
    nb = knn_neighbours(ds, X, k)
    frac = np.mean(ds.y[nb] == PATIENT, axis=1)
    labels = np.where(frac > 0.5, PATIENT, CONTROL)
    return (labels, frac) if return_scores else labels


@dataclass(frozen=True)
class KnnModel:
    train: Dataset
    k: int = 5

    def predict(self, X):
        return predict_knn(self.train, X, self.k, return_scores=True)


# ---------------------------------------------------------------------------
# MLP: FC -> BatchNorm -> ReLU -> FC -> softmax, trained with Adam
# ---------------------------------------------------------------------------

BN_EPS = 1e-5
BN_MOMENTUM = 0.1
PARAMS = ("W1", "b1", "gamma", "beta", "W2", "b2")


@dataclass(frozen=True)
class MlpModel:
    W1: np.ndarray
    b1: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    best_epoch: int
    history: dict = field(default_factory=dict, compare=False, repr=False)
    adam_state: dict = field(default_factory=dict, compare=False, repr=False)

    def proba(self, X):
        """Softmax outputs, columns ``(p(-1), p(+1))``; batch statistics frozen."""
        X = _as_matrix(X, self.W1.shape[0])
        Z = X @ self.W1 + self.b1
        Zh = (Z - self.running_mean) / np.sqrt(self.running_var + BN_EPS)
        A = np.maximum(self.gamma * Zh + self.beta, 0.0)
        return _softmax(A @ self.W2 + self.b2)

    def predict(self, X):
        P = self.proba(X)
        return np.where(P[:, 1] >= P[:, 0], PATIENT, CONTROL), P[:, 1]


def _softmax(L):
    L = L - L.max(axis=1, keepdims=True)
    E = np.exp(L)
    return E / E.sum(axis=1, keepdims=True)


def _cross_entropy(P, t):
    return float(-np.mean(np.log(np.maximum(P[np.arange(len(t)), t], 1e-300))))


def _forward_train(p, X):
    Z = X @ p["W1"] + p["b1"]
    mu = Z.mean(0)
    var = Z.var(0)
    inv = 1.0 / np.sqrt(var + BN_EPS)
    Zh = (Z - mu) * inv
    U = p["gamma"] * Zh + p["beta"]
    A = np.maximum(U, 0.0)
    P = _softmax(A @ p["W2"] + p["b2"])
    return P, (X, Zh, inv, U, A, mu, var)


def _backward(p, cache, P, t):
    X, Zh, inv, U, A, _, _ = cache
    m = X.shape[0]
    dL = P.copy()
    dL[np.arange(m), t] -= 1.0
    dL /= m
    g = {"W2": A.T @ dL, "b2": dL.sum(0)}
    dU = (dL @ p["W2"].T) * (U > 0)
    g["gamma"] = (dU * Zh).sum(0)
    g["beta"] = dU.sum(0)
    dZh = dU * p["gamma"]
    dZ = inv * (dZh - dZh.mean(0) - Zh * (dZh * Zh).mean(0))
    g["W1"] = X.T @ dZ
    g["b1"] = dZ.sum(0)
    return g


def stratified_holdout(y, fraction, rng):
    """Boolean mask selecting about ``fraction`` of each class for validation."""
    y = np.asarray(y)
    mask = np.zeros(len(y), dtype=bool)
    for cls in (PATIENT, CONTROL):
        idx = np.flatnonzero(y == cls)
        k = int(round(fraction * len(idx)))
        k = min(max(k, 1), len(idx) - 1) if len(idx) > 1 else 0
        mask[rng.permutation(idx)[:k]] = True
    return mask


def train_mlp(ds: Dataset, hidden=64, epochs=200, lr=1e-3, seed=0, batch_size=32, val_fraction=0.15,
              betas=(0.9, 0.999), adam_eps=1e-8) -> MlpModel:
    """Train the MLP with Adam on mini-batches of about ``batch_size``.

    A stratified ``val_fraction`` of the data is held out; the returned
    weights (and batch-norm running statistics) are those of the epoch with
    the lowest validation cross-entropy, earliest epoch on ties.

    Raises
    ------
    FloatingPointError
        If the training loss becomes non-finite.
    """
    if hidden < 1 or epochs < 1:
        raise ValueError("hidden and epochs must be at least 1")
    rng = np.random.default_rng(seed)
    X = np.asarray(ds.X, dtype=float)
    t_all = (ds.y == PATIENT).astype(int)
    val = stratified_holdout(ds.y, val_fraction, rng)
    Xtr, ttr, Xva, tva = X[~val], t_all[~val], X[val], t_all[val]
    d = X.shape[1]
    p = {
        "W1": rng.normal(0.0, np.sqrt(2.0 / d), size=(d, hidden)),
        "b1": np.zeros(hidden),
        "gamma": np.ones(hidden),
        "beta": np.zeros(hidden),
        "W2": rng.normal(0.0, np.sqrt(2.0 / hidden), size=(hidden, 2)),
        "b2": np.zeros(2),
    }
    run_mean, run_var = np.zeros(hidden), np.ones(hidden)
    m1 = {k: np.zeros_like(v) for k, v in p.items()}
    m2 = {k: np.zeros_like(v) for k, v in p.items()}
    b1, b2 = betas
    step = 0
    n_batches = max(1, int(np.ceil(len(ttr) / batch_size)))
    best, best_loss = None, np.inf
    train_hist, val_hist = [], []
    for epoch in range(epochs):
        order = rng.permutation(len(ttr))
        losses = []
        for batch in np.array_split(order, n_batches):
            if len(batch) < 2:
                continue
            P, cache = _forward_train(p, Xtr[batch])
            loss = _cross_entropy(P, ttr[batch])
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite training loss at epoch {epoch} (lr={lr}, hidden={hidden})")
            losses.append(loss)
            g = _backward(p, cache, P, ttr[batch])
            step += 1
            for k in PARAMS:
                m1[k] = b1 * m1[k] + (1 - b1) * g[k]
                m2[k] = b2 * m2[k] + (1 - b2) * g[k] ** 2
                mhat = m1[k] / (1 - b1 ** step)
                vhat = m2[k] / (1 - b2 ** step)
                p[k] = p[k] - lr * mhat / (np.sqrt(vhat) + adam_eps)
            mu, var = cache[5], cache[6]
            nb = len(batch)
            run_mean = (1 - BN_MOMENTUM) * run_mean + BN_MOMENTUM * mu
            run_var = (1 - BN_MOMENTUM) * run_var + BN_MOMENTUM * var * nb / (nb - 1)
        snapshot = MlpModel(*(p[k].copy() for k in ("W1", "b1", "gamma", "beta")), run_mean.copy(),
                            run_var.copy(), p["W2"].copy(), p["b2"].copy(), epoch)
        train_hist.append(float(np.mean(losses)) if losses else np.nan)
        v_loss = _cross_entropy(snapshot.proba(Xva), tva) if len(tva) else train_hist[-1]
        val_hist.append(v_loss)
        if v_loss < best_loss:
            best, best_loss = snapshot, v_loss
    best = best if best is not None else snapshot
    history = {"train_loss": train_hist, "val_loss": val_hist}
    adam = {"m": m1, "v": m2, "step": step, "lr": lr, "betas": betas, "eps": adam_eps}
    return MlpModel(best.W1, best.b1, best.gamma, best.beta, best.running_mean, best.running_var, best.W2,
                    best.b2, best.best_epoch, history, adam)


# ---------------------------------------------------------------------------
# RVFL and RVFL with autoencoder pretraining
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RvflModel:
    W_in: np.ndarray
    b_in: np.ndarray
    S: float
    beta: np.ndarray
    C_reg: float
    seed: int
    pretrained: bool = False
    direct_only: bool = False
    info: dict = field(default_factory=dict, compare=False, repr=False)

    def design(self, X):
        """``D = [X | sigmoid(X W_in + b_in)]`` (just ``X`` when ``direct_only``)."""
        X = _as_matrix(X, self.W_in.shape[0])
        if self.direct_only:
            return X
        return np.hstack([X, expit(X @ self.W_in + self.b_in)])

    def decision(self, X):
        return self.design(X) @ self.beta

    def predict(self, X):
        f = self.decision(X)
        return _sign_labels(f), f


def ridge_output_weights(D, y, lam):
    """``beta = (D'D + lam I)^-1 D'y``, via the equivalent ``n x n`` system
    ``D'(DD' + lam I)^-1 y`` when ``D`` has more columns than rows."""
    n, m = D.shape
    if lam <= 0:
        raise ValueError("ridge parameter must be positive")
    if m > n:
        return D.T @ solve_spd(D @ D.T + lam * np.eye(n), y, warn=False)
    return solve_spd(D.T @ D + lam * np.eye(m), D.T @ y, warn=False)


def _random_hidden(d, N, S, rng):
    return rng.uniform(-S, S, size=(d, N)), rng.uniform(-S, S, size=N)


def train_rvfl(ds: Dataset, N=100, C_exp=0, S=1.0, seed=0, direct_only=False) -> RvflModel:
    """Random vector functional link network.

    Hidden weights and biases are uniform on ``[-S, S]`` with a sigmoid
    activation; the output weights solve a ridge problem on ``D = [X | H]``
    with ``lam = 2**C_exp``.  ``direct_only`` zeroes the hidden block (a
    test hook: the model reduces to ridge regression on the raw features).
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if S <= 0:
        raise ValueError("S must be positive")
    rng = np.random.default_rng(seed)
    W, b = _random_hidden(ds.d, N, S, rng)
    lam = 2.0 ** C_exp
    model = RvflModel(W, b, float(S), np.zeros(0), lam, int(seed), False, direct_only)
    beta = ridge_output_weights(model.design(ds.X), ds.y.astype(float), lam)
    return RvflModel(W, b, float(S), beta, lam, int(seed), False, direct_only)


def train_rvfl_ae(ds: Dataset, N=100, C_exp=0, l1=1e-3, S=1.0, seed=0, max_iter=500) -> RvflModel:
    """RVFL whose input-to-hidden weights come from a sparse autoencoder.

    A random map ``H~ = sigmoid(X W + b)`` is drawn as in :func:`train_rvfl`;
    then ``w = argmin ||H~ w - X||^2 + l1 ||w||_1`` is solved by FISTA and
    ``w'`` replaces the random input weights.  Output weights follow as in
    RVFL.  ``info`` carries the FISTA diagnostics; hitting ``max_iter`` is
    recorded there as ``converged=False`` rather than raised.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if l1 < 0:
        raise ValueError("l1 must be non-negative")
    rng = np.random.default_rng(seed)
    W, b = _random_hidden(ds.d, N, S, rng)
    H = expit(ds.X @ W + b)
    omega, info = fista_l1(H, ds.X, l1, max_iter=max_iter, full_output=True, warn=False)
    W_in = np.ascontiguousarray(omega.T)
    lam = 2.0 ** C_exp
    model = RvflModel(W_in, b, float(S), np.zeros(0), lam, int(seed), True)
    beta = ridge_output_weights(model.design(ds.X), ds.y.astype(float), lam)
    info = {k: info[k] for k in ("objective", "iterations", "converged", "restarts")}
    return RvflModel(W_in, b, float(S), beta, lam, int(seed), True, False, info)
