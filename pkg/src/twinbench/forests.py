"""Random forests with axis-parallel and oblique (linear-classifier) splits.

Variants
--------
``RaF``       best axis-parallel Gini split on ``sqrt(d)`` random features.
``MPRaF_T``   MPSVM bisector split, Tikhonov ridge on both scatter matrices.
``MPRaF_P``   unregularized MPSVM; axis split when the node is ill-conditioned.
``MPRaF_N``   MPSVM restricted to the own-class null space (Tikhonov fallback).
``Het``       best of six linear learners (SVM, MPSVM, LDA, LSSVM, ridge,
              logistic) and the axis split.
``RaF_LDA``   Fisher discriminant direction with the best Gini threshold,
              kept only if it beats the best axis split.
``RaF_PCA``   first principal direction, likewise competing with the axis split.

Every tree draws a bootstrap sample and its own RNG stream from
``SeedSequence((seed, tree_index))``, so forests do not depend on the order
in which trees are built.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.special import expit

from .data import CONTROL, PATIENT, Dataset
from .numkit import QpUnbounded, jacobi_eigh, min_gen_eigenpair, solve_spd
from .svmfam import fit_svm

VARIANTS = ("RaF", "MPRaF_T", "MPRaF_P", "MPRaF_N", "Het", "RaF_LDA", "RaF_PCA")
MAX_DEPTH = 30
MIN_SAMPLES = 3
TIKHONOV = 0.01
COND_LIMIT = 1e12
NULL_TOL = 1e-10
HET_LEARNERS = ("SVM", "MPSVM", "LDA", "LSSVM", "Ridge", "Logistic")


@dataclass(frozen=True)
class SplitRule:
    """``x`` goes left iff ``x[features] @ weights + bias <= 0``.

    An axis rule has a single feature with weight 1 and ``bias = -threshold``.
    """

    kind: str
    features: np.ndarray
    weights: np.ndarray
    bias: float

    def __post_init__(self):
        if self.kind not in ("axis", "oblique"):
            raise ValueError(f"unknown split kind {self.kind!r}")
        if not np.isfinite(self.bias) or not np.all(np.isfinite(self.weights)):
            raise ValueError("split rule has non-finite parameters")
        if not np.any(self.weights != 0):
            raise ValueError("split weights must not all be zero")

    @classmethod
    def axis(cls, feature, threshold):
        return cls("axis", np.array([int(feature)]), np.array([1.0]), -float(threshold))

    @classmethod
    def oblique(cls, features, weights, bias):
        return cls("oblique", np.asarray(features, dtype=int), np.asarray(weights, dtype=float), float(bias))

    @property
    def feature(self):
        return int(self.features[0])

    @property
    def threshold(self):
        return -self.bias

    def goes_left(self, X):
        return X[:, self.features] @ self.weights + self.bias <= 0


@dataclass(frozen=True)
class TreeNode:
    p_pos: float
    n_samples: int
    rule: SplitRule | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self):
        return self.rule is None

    @property
    def proba(self):
        """Leaf distribution ``(p(+1), p(-1))``."""
        return self.p_pos, 1.0 - self.p_pos

    def depth(self):
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())


@dataclass(frozen=True)
class Forest:
    trees: tuple
    n_trees: int
    variant: str
    seed: int
    n_features: int
    traces: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if self.n_trees != len(self.trees):
            raise ValueError("n_trees does not match the number of trees")

    def predict(self, X):
        return predict_forest(self, X)


# ---------------------------------------------------------------------------
# Gini machinery
# ---------------------------------------------------------------------------

def gini(pos, total):
    """Gini impurity of a node with ``pos`` patients out of ``total``."""
    p = pos / total
    return 2.0 * p * (1.0 - p)


def gini_gain(y, left):
    """Impurity decrease of splitting labels ``y`` by the boolean mask ``left``."""
    y = np.asarray(y)
    left = np.asarray(left, dtype=bool)
    n, nl = len(y), int(left.sum())
    if nl in (0, n):
        return 0.0
    pos = y == PATIENT
    pl, pt = int(pos[left].sum()), int(pos.sum())
    nr = n - nl
    return gini(pt, n) - (nl * gini(pl, nl) + nr * gini(pt - pl, nr)) / n


def best_thresholds(Z, y):
    """Best Gini threshold for every column of ``Z``.

    Returns ``(gains, thresholds)``; a column without two distinct values has
    gain ``-inf``.  Thresholds are midpoints between consecutive sorted values
    and the rule is ``z <= threshold``.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    n, k = Z.shape
    pos = (np.asarray(y) == PATIENT).astype(float)
    order = np.argsort(Z, axis=0, kind="stable")
    Zs = np.take_along_axis(Z, order, axis=0)
    P = np.cumsum(pos[order], axis=0)
    nl = np.arange(1, n, dtype=float)[:, None]
    nr = n - nl
    pl = P[:-1]
    pr = P[-1] - pl
    child = (nl * gini(pl, nl) + nr * gini(pr, nr)) / n
    gain = gini(P[-1], n) - child
    gain = np.where(Zs[1:] > Zs[:-1], gain, -np.inf)
    idx = np.argmax(gain, axis=0)
    cols = np.arange(k)
    lo, hi = Zs[idx, cols], Zs[idx + 1, cols]
    thr = lo + 0.5 * (hi - lo)
    thr = np.where(thr >= hi, lo, thr)
    return gain[idx, cols], thr


def best_axis_split(X, y, features):
    """Best axis-parallel split over ``features``; ``None`` if all are constant."""
    gains, thr = best_thresholds(X[:, features], y)
    j = int(np.argmax(gains))
    if not np.isfinite(gains[j]):
        return None
    return float(gains[j]), SplitRule.axis(features[j], thr[j])


def _direction_split(Xs, y, features, w):
    norm = np.linalg.norm(w)
    if not np.isfinite(norm) or norm < 1e-12:
        return None
    w = w / norm
    gains, thr = best_thresholds(Xs @ w, y)
    if not np.isfinite(gains[0]):
        return None
    return float(gains[0]), SplitRule.oblique(features, w, -thr[0])


# ---------------------------------------------------------------------------
# Linear split learners
# ---------------------------------------------------------------------------

def _augmented(X):
    return np.hstack([X, np.ones((X.shape[0], 1))])


def _null_space_plane(own, other):
    """Plane inside the null space of ``own`` that maximizes ``z' other z``."""
    w, V = jacobi_eigh(own)
    N = V[:, w < NULL_TOL]
    if N.shape[1] == 0:
        return None
    _, U = jacobi_eigh(N.T @ other @ N)
    return N @ U[:, -1]


def mpsvm_planes(Xs, y, mode="T"):
    """Proximal planes ``(z1, z2)`` of the two classes, or ``None``.

    ``z1`` minimizes ``|G z|^2 / |H z|^2`` with ``G = [X+ e]``, ``H = [X- e]``
    and ``z2`` the reverse.  ``mode`` selects the regularization: ``"T"``
    adds a Tikhonov ridge, ``"P"`` returns ``None`` when either scatter
    matrix has condition number above ``1e12``, ``"N"`` works in the
    own-class null space when it is non-trivial.
    """
    G = _augmented(Xs[y == PATIENT])
    H = _augmented(Xs[y == CONTROL])
    GG, HH = G.T @ G, H.T @ H
    try:
        if mode == "T":
            return min_gen_eigenpair(GG, HH, TIKHONOV)[1], min_gen_eigenpair(HH, GG, TIKHONOV)[1]
        if mode == "P":
            if np.linalg.cond(GG) > COND_LIMIT or np.linalg.cond(HH) > COND_LIMIT:
                return None
            return min_gen_eigenpair(GG, HH)[1], min_gen_eigenpair(HH, GG)[1]
        if mode == "N":
            z1 = _null_space_plane(GG, HH)
            z2 = _null_space_plane(HH, GG)
            if z1 is None:
                z1 = min_gen_eigenpair(GG, HH, TIKHONOV)[1]
            if z2 is None:
                z2 = min_gen_eigenpair(HH, GG, TIKHONOV)[1]
            return z1, z2
    except ValueError:
        return None
    raise ValueError(f"unknown MPSVM mode {mode!r}")


def bisectors(z1, z2):
    """The two angle bisectors ``(w, b)`` of a pair of augmented planes."""
    out = []
    n1, n2 = np.linalg.norm(z1[:-1]), np.linalg.norm(z2[:-1])
    if n1 < 1e-12 or n2 < 1e-12:
        return out
    a, b = z1 / n1, z2 / n2
    for v in (a + b, a - b):
        if np.linalg.norm(v[:-1]) > 1e-12:
            out.append((v[:-1], float(v[-1])))
    return out


def _mpsvm_directions(Xs, y):
    planes = mpsvm_planes(Xs, y, "T")
    return [w for w, _ in bisectors(*planes)] if planes else []


def _svm_direction(Xs, y):
    m = fit_svm(Xs, y, C=1.0)
    return [(m.alpha * m.labels) @ m.points] if m.alpha.size else []


def _lda_direction(Xs, y):
    A, B = Xs[y == PATIENT], Xs[y == CONTROL]
    Sw = (A - A.mean(0)).T @ (A - A.mean(0)) + (B - B.mean(0)).T @ (B - B.mean(0))
    r = 1e-6 * (np.trace(Sw) / Sw.shape[0] + 1.0)
    return [solve_spd(Sw + r * np.eye(Sw.shape[0]), A.mean(0) - B.mean(0), warn=False)]


def _lssvm_direction(Xs, y, gamma=1.0):
    n = len(y)
    K = Xs @ Xs.T
    S = np.zeros((n + 1, n + 1))
    S[0, 1:] = S[1:, 0] = 1.0
    S[1:, 1:] = K + np.eye(n) / gamma
    sol = np.linalg.solve(S, np.concatenate([[0.0], y.astype(float)]))
    return [Xs.T @ sol[1:]]


def _ridge_direction(Xs, y, lam=1.0):
    A = _augmented(Xs)
    beta = solve_spd(A.T @ A + lam * np.eye(A.shape[1]), A.T @ y.astype(float), warn=False)
    return [beta[:-1]]


def _logistic_direction(Xs, y, steps=10, lam=1e-4):
    A = _augmented(Xs)
    t = (y == PATIENT).astype(float)
    beta = np.zeros(A.shape[1])
    eye = np.eye(A.shape[1])
    for _ in range(steps):
        p = expit(A @ beta)
        W = p * (1.0 - p)
        grad = A.T @ (t - p) - lam * beta
        beta = beta + solve_spd((A * W[:, None]).T @ A + lam * eye, grad, warn=False)
    return [beta[:-1]]


_HET = dict(zip(HET_LEARNERS, (_svm_direction, _mpsvm_directions, _lda_direction, _lssvm_direction,
                               _ridge_direction, _logistic_direction)))


def _pca_direction(Xs):
    C = Xs - Xs.mean(0)
    w, V = np.linalg.eigh(C.T @ C)
    return V[:, -1] if w[-1] > 1e-12 else None


# ---------------------------------------------------------------------------
# Tree growing
# ---------------------------------------------------------------------------

def _choose_split(X, y, variant, rng, trace):
    d = X.shape[1]
    features = np.sort(rng.choice(d, size=max(1, int(np.sqrt(d))), replace=False))
    Xs = X[:, features]
    axis = best_axis_split(X, y, features)
    record = {"n": len(y), "axis_gain": axis[0] if axis else None, "fallback": False}
    best, learner = None, None

    if variant == "RaF":
        best, learner = axis, "axis"
    elif variant.startswith("MPRaF"):
        planes = mpsvm_planes(Xs, y, variant[-1])
        for w, b in bisectors(*planes) if planes else []:
            left = Xs @ w + b <= 0
            g = gini_gain(y, left)
            if 0 < left.sum() < len(y) and (best is None or g > best[0]):
                best, learner = (g, SplitRule.oblique(features, w, b)), "MPSVM"
        if best is None:
            best, learner = axis, "axis"
            record["fallback"] = True
    elif variant == "Het":
        for name, fn in _HET.items():
            try:
                directions = fn(Xs, y)
            except (ValueError, np.linalg.LinAlgError, QpUnbounded):
                continue
            for w in directions:
                cand = _direction_split(Xs, y, features, w)
                if cand is not None and (best is None or cand[0] > best[0]):
                    best, learner = cand, name
        if axis is not None and (best is None or axis[0] > best[0]):
            best, learner = axis, "axis"
    elif variant in ("RaF_LDA", "RaF_PCA"):
        try:
            w = _lda_direction(Xs, y)[0] if variant == "RaF_LDA" else _pca_direction(Xs)
        except (ValueError, np.linalg.LinAlgError):
            w = None
        best = _direction_split(Xs, y, features, w) if w is not None else None
        learner = variant[4:]
        if best is None:
            record["fallback"] = True
        if axis is not None and (best is None or axis[0] > best[0]):
            best, learner = axis, "axis"
    else:
        raise ValueError(f"unknown forest variant {variant!r}")

    if best is not None:
        record.update(gain=best[0], kind=best[1].kind, learner=learner)
        if trace is not None:
            trace.append(record)
    return best


def grow_tree(X, y, variant="RaF", rng=None, depth=0, max_depth=MAX_DEPTH, min_samples=MIN_SAMPLES, trace=None):
    """Grow one tree on ``(X, y)`` (no bootstrap here)."""
    rng = np.random.default_rng(0) if rng is None else rng
    n = len(y)
    p_pos = float(np.mean(y == PATIENT))
    if p_pos in (0.0, 1.0) or depth >= max_depth or n < min_samples:
        return TreeNode(p_pos, n)
    split = _choose_split(X, y, variant, rng, trace)
    if split is None or split[0] <= 1e-12:
        return TreeNode(p_pos, n)
    rule = split[1]
    left = rule.goes_left(X)
    if left.all() or not left.any():
        return TreeNode(p_pos, n)
    kw = dict(variant=variant, rng=rng, depth=depth + 1, max_depth=max_depth, min_samples=min_samples, trace=trace)
    return TreeNode(p_pos, n, rule, grow_tree(X[left], y[left], **kw), grow_tree(X[~left], y[~left], **kw))


def tree_rng(seed, tree_index):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(tree_index)]))


def bootstrap_indices(n, seed, tree_index):
    """In-bag sample (with replacement, size ``n``) of tree ``tree_index``."""
    return tree_rng(seed, tree_index).integers(0, n, size=n)


def _fit_tree(X, y, variant, seed, t, trace):
    rng = tree_rng(seed, t)
    idx = rng.integers(0, len(y), size=len(y))
    log = [] if trace else None
    root = grow_tree(X[idx], y[idx], variant, rng, trace=log)
    return root, log


def train_forest(ds: Dataset, variant="RaF", n_trees=100, seed=0, trace=False) -> Forest:
    """Train a bootstrap forest of ``n_trees`` trees of the given variant.

    Trees stop at pure nodes, depth 30, or fewer than 3 samples.  With
    ``trace`` each tree keeps a per-node log (gain, best axis gain,
    learner, fallback flag).
    """
    return fit_forest(ds.X, ds.y, variant, n_trees, seed, trace)


def fit_forest(X, y, variant="RaF", n_trees=100, seed=0, trace=False) -> Forest:
    if variant not in VARIANTS:
        raise ValueError(f"unknown forest variant {variant!r}")
    if n_trees < 1:
        raise ValueError("n_trees must be at least 1")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    built = [_fit_tree(X, y, variant, seed, t, trace) for t in range(n_trees)]
    return Forest(tuple(b[0] for b in built), n_trees, variant, int(seed), X.shape[1],
                  tuple(b[1] for b in built) if trace else ())


def tree_proba(node: TreeNode, X):
    """``p(+1 | x)`` from a single tree, for every row of ``X``."""
    out = np.empty(X.shape[0])
    _route(node, X, np.arange(X.shape[0]), out)
    return out


def _route(node, X, idx, out):
    if node.is_leaf or idx.size == 0:
        out[idx] = node.p_pos
        return
    left = node.rule.goes_left(X[idx])
    _route(node.left, X, idx[left], out)
    _route(node.right, X, idx[~left], out)


def predict_forest(f: Forest, X):
    """Average of per-tree ``p(+1|x)``; label +1 iff the score is >= 0.5."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != f.n_features:
        raise ValueError(f"expected {f.n_features} features, got {X.shape[1]}")
    scores = np.mean([tree_proba(t, X) for t in f.trees], axis=0)
    return np.where(scores >= 0.5, PATIENT, CONTROL), scores


# ---------------------------------------------------------------------------
# Hyper-class partition (Dunn index)
# ---------------------------------------------------------------------------

def _pairwise(A, B):
    return np.sqrt(np.maximum(((A[:, None, :] - B[None, :, :]) ** 2).sum(-1), 0.0))


def dunn_index(clusters, distance=_pairwise):
    """``min_{i<j} diss(c_i, c_j) / max_m diam(c_m)``.

    ``diss`` is the smallest cross-cluster distance and ``diam`` the largest
    within-cluster distance, both under ``distance`` (Euclidean by default).
    """
    clusters = [np.atleast_2d(np.asarray(c, dtype=float)) for c in clusters]
    if len(clusters) < 2:
        raise ValueError("need at least two clusters")
    diam = max(float(distance(c, c).max()) for c in clusters)
    diss = min(float(distance(a, b).min()) for a, b in combinations(clusters, 2))
    return np.inf if diam == 0 else diss / diam


def hyperclass_partition(X, labels, distance=_pairwise):
    """Split the label set into two hyper-classes with the largest Dunn index.

    Every bipartition of the distinct labels is scored by the Dunn index of
    the two groups of points it induces.  Ties go to the first bipartition
    in enumeration order.  For two labels the answer is the identity split.

    Returns ``(group_a, group_b, score)`` with groups as tuples of labels.
    """
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    classes = list(np.unique(labels))
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    best = None
    rest = classes[1:]
    for r in range(0, len(rest)):
        for extra in combinations(rest, r):
            a = (classes[0],) + extra
            b = tuple(c for c in classes if c not in a)
            score = dunn_index([X[np.isin(labels, a)], X[np.isin(labels, b)]], distance)
            if best is None or score > best[2]:
                best = (a, b, score)
    return best
