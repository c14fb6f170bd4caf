"""Filter feature ranking: t-test, entropy, Bhattacharyya, ROC, Wilcoxon,
MRMR and NCA feature weighting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .data import CONTROL, PATIENT, Dataset

TTEST = "TTest"
ROC = "ROC"
WILCOXON = "Wilcoxon"
ENTROPY = "Entropy"
BHATTACHARYYA = "Bhattacharyya"
MRMR = "MRMR"
NCA = "NCA"

FILTER_CRITERIA = (TTEST, ROC, WILCOXON, ENTROPY, BHATTACHARYYA)
# column order of the published result tables
CRITERIA = (TTEST, ROC, WILCOXON, ENTROPY, BHATTACHARYYA, MRMR, NCA)
DISPLAY_NAMES = {
    TTEST: "T-Test",
    ROC: "ROC",
    WILCOXON: "Wilcoxon",
    ENTROPY: "Entropy",
    BHATTACHARYYA: "Bhattacharyya",
    MRMR: "MRMR",
    NCA: "NCA",
}


@dataclass(frozen=True)
class Ranking:
    """Feature indices best-first plus the per-feature scores behind them.

    ``flagged`` lists features whose score hit a degenerate case (zero
    variance); ``info`` carries criterion-specific diagnostics.
    """

    order: np.ndarray
    scores: np.ndarray
    criterion: str
    flagged: tuple = ()
    info: dict = field(default_factory=dict, compare=False)


def descending_order(scores):
    """Sort descending with ties broken by ascending index."""
    scores = np.asarray(scores, dtype=float)
    return np.lexsort((np.arange(scores.size), -scores))


def _split(ds: Dataset):
    A = ds.X[ds.y == PATIENT]
    B = ds.X[ds.y == CONTROL]
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ValueError("both classes must be present")
    return A, B


def _degenerate(score, bad, mean_diff):
    # zero-variance convention: +inf when the means differ, 0 otherwise
    score = np.where(bad, np.where(mean_diff != 0, np.inf, 0.0), score)
    return score, tuple(int(j) for j in np.flatnonzero(bad))


def ttest_scores(A, B):
    n1, n2 = A.shape[0], B.shape[0]
    m1, m2 = A.mean(0), B.mean(0)
    ss = ((A - m1) ** 2).sum(0) + ((B - m2) ** 2).sum(0)
    sp = np.sqrt(ss / max(n1 + n2 - 2, 1))
    diff = np.abs(m1 - m2)
    bad = sp <= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        score = diff / (sp * np.sqrt(1.0 / n1 + 1.0 / n2))
    return _degenerate(score, bad, diff)


def _class_var(A):
    return A.var(0, ddof=1) if A.shape[0] > 1 else np.zeros(A.shape[1])


def entropy_scores(A, B):
    """Symmetric Kullback-Leibler divergence of the two class Gaussians."""
    m1, m2 = A.mean(0), B.mean(0)
    v1, v2 = _class_var(A), _class_var(B)
    bad = (v1 <= 0) | (v2 <= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        score = 0.5 * ((v1 / v2 + v2 / v1) + (m1 - m2) ** 2 * (1 / v1 + 1 / v2)) - 1.0
    return _degenerate(score, bad, m1 - m2)


def bhattacharyya_scores(A, B):
    m1, m2 = A.mean(0), B.mean(0)
    v1, v2 = _class_var(A), _class_var(B)
    bad = (v1 <= 0) | (v2 <= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        score = 0.25 * (m1 - m2) ** 2 / (v1 + v2) + 0.5 * np.log((v1 + v2) / (2 * np.sqrt(v1 * v2)))
    return _degenerate(score, bad, m1 - m2)


def mann_whitney_u(A, B):
    """U statistic of the first sample per column, mid-ranks for ties."""
    n1 = A.shape[0]
    ranks = rankdata(np.vstack([A, B]), axis=0)
    return ranks[:n1].sum(0) - n1 * (n1 + 1) / 2.0


def wilcoxon_scores(A, B):
    n1, n2 = A.shape[0], B.shape[0]
    U = mann_whitney_u(A, B)
    score = np.abs(U - n1 * n2 / 2.0) / np.sqrt(n1 * n2 * (n1 + n2 + 1) / 12.0)
    return score, ()


def roc_scores(A, B):
    auc = mann_whitney_u(A, B) / (A.shape[0] * B.shape[0])
    return np.abs(auc - 0.5), ()


_FILTERS = {
    TTEST: ttest_scores,
    ENTROPY: entropy_scores,
    BHATTACHARYYA: bhattacharyya_scores,
    ROC: roc_scores,
    WILCOXON: wilcoxon_scores,
}


def rank_by_criterion(ds: Dataset, criterion: str) -> Ranking:
    if criterion not in _FILTERS:
        raise ValueError(f"{criterion!r} is not a filter criterion; choose from {FILTER_CRITERIA}")
    A, B = _split(ds)
    scores, flagged = _FILTERS[criterion](A, B)
    scores = np.asarray(scores, dtype=float)
    return Ranking(descending_order(scores), scores, criterion, flagged)


# ---------------------------------------------------------------------------
# MRMR
# ---------------------------------------------------------------------------

def equal_frequency_bins(X, bins):
    """Bin codes per column from mid-ranks; tied values share a bin."""
    n = X.shape[0]
    r = rankdata(X, axis=0)
    return np.minimum(((r - 0.5) * bins / n).astype(int), bins - 1)


def mutual_information(a, b):
    """Plug-in mutual information (nats) of two discrete code vectors."""
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    return float(mutual_information_many(ia[:, None], ib, ia.max() + 1, ib.max() + 1)[0])


def _xlogx_table(n):
    k = np.arange(n + 1, dtype=float)
    out = np.zeros(n + 1)
    out[1:] = k[1:] * np.log(k[1:])
    return out


def _entropy_from_counts(counts, n, table):
    # H = log n - (1/n) sum c log c over the count cells on the last axis
    return np.log(n) - table[counts].sum(axis=-1) / n


def mutual_information_many(codes, target, n_codes, n_target):
    """``I(codes[:, j]; target)`` for every column at once via joint counts.

    ``codes`` holds integers in ``[0, n_codes)``, ``target`` in ``[0, n_target)``.
    """
    n, c = codes.shape
    table = _xlogx_table(n)
    cells = n_target * n_codes
    idx = (target[:, None] * n_codes + codes + np.arange(c) * cells).ravel()
    joint = np.bincount(idx, minlength=c * cells).reshape(c, cells)
    marg = np.bincount((codes + np.arange(c) * n_codes).ravel(), minlength=c * n_codes)
    h_codes = _entropy_from_counts(marg.reshape(c, n_codes), n, table)
    h_target = _entropy_from_counts(np.bincount(target, minlength=n_target), n, table)
    return h_codes + h_target - _entropy_from_counts(joint, n, table)


class _PairwiseMI:
    """Mutual information of every feature against one reference column.

    Codes are stored feature-major with per-feature offsets so a single
    ``bincount`` yields all joint histograms at once.
    """

    def __init__(self, codes, n_codes):
        n, d = codes.shape
        self.n, self.d, self.k = n, d, n_codes
        self.table = _xlogx_table(n)
        cells = n_codes * n_codes
        self.offset_codes = np.ascontiguousarray((codes + np.arange(d) * cells).T)
        marg = np.bincount((codes + np.arange(d) * n_codes).ravel(), minlength=d * n_codes)
        self.h = _entropy_from_counts(marg.reshape(d, n_codes), n, self.table)

    def against(self, j):
        ref = self.offset_codes[j] - j * self.k * self.k
        idx = self.offset_codes + (ref * self.k)[None, :]
        joint = np.bincount(idx.ravel(), minlength=self.d * self.k * self.k)
        h_joint = _entropy_from_counts(joint.reshape(self.d, -1), self.n, self.table)
        return self.h + self.h[j] - h_joint


def rank_mrmr(ds: Dataset, bins=10, n_select=None, tie_tol=1e-12) -> Ranking:
    """Greedy MRMR with the difference (MID) criterion.

    Relevance is ``I(f; y)``; a candidate's score is its relevance minus its
    mean mutual information with the already selected features.  Scores
    within ``tie_tol`` of the best are tied; ties go to the less redundant
    feature, then to the lower index.

    With ``n_select`` the greedy loop stops after that many picks and the
    remaining features follow in order of their objective at that point.
    """
    if bins < 2:
        raise ValueError("bins must be at least 2")
    d = ds.d
    n_select = d if n_select is None else max(1, min(int(n_select), d))
    codes = equal_frequency_bins(ds.X, bins)
    target = (ds.y == PATIENT).astype(int)
    relevance = mutual_information_many(codes, target, bins, 2)
    pairwise = _PairwiseMI(codes, bins)
    order = [int(np.argmax(relevance))]
    scores = np.empty(d)
    scores[order[0]] = relevance[order[0]]
    redundancy_sum = np.zeros(d)
    remaining = np.ones(d, dtype=bool)
    remaining[order[0]] = False
    while remaining.any():
        redundancy_sum += pairwise.against(order[-1])
        cand = np.flatnonzero(remaining)
        red = redundancy_sum[cand] / len(order)
        obj = relevance[cand] - red
        if len(order) >= n_select:
            scores[cand] = obj
            order.extend(int(j) for j in cand[descending_order(obj)])
            break
        best = obj.max()
        tied = np.flatnonzero(obj >= best - tie_tol)
        tied = tied[red[tied] <= red[tied].min() + tie_tol]
        pick = int(cand[tied[0]])
        scores[pick] = obj[tied[0]]
        order.append(pick)
        remaining[pick] = False
    return Ranking(np.array(order), scores, MRMR, (),
                   {"relevance": relevance, "bins": bins, "greedy_count": n_select})


# ---------------------------------------------------------------------------
# NCA feature weighting
# ---------------------------------------------------------------------------

def _nca_terms(X, same, w):
    """Objective pieces for weights ``w`` (squared-weight distances)."""
    Xw = X * w
    sq = np.einsum("ij,ij->i", Xw, Xw)
    D = np.maximum(sq[:, None] + sq[None, :] - 2.0 * Xw @ Xw.T, 0.0)
    np.fill_diagonal(D, np.inf)
    logits = -D
    logits -= logits.max(axis=1, keepdims=True)
    K = np.exp(logits)
    P = K / K.sum(axis=1, keepdims=True)
    p = np.sum(P * same, axis=1)
    return P, p


def nca_objective(X, y, w, lam):
    same = (y[:, None] == y[None, :]).astype(float)
    _, p = _nca_terms(X, same, w)
    return float(p.mean() - lam * np.sum(w * w))


def _nca_value_and_grad(X, X2, same, w, lam):
    n = X.shape[0]
    P, p = _nca_terms(X, same, w)
    Q = P * same
    # sum_k P_ik (x_ir - x_kr)^2, expanded so no n*n*d tensor is formed
    spread_all = X2 - 2.0 * X * (P @ X) + P @ X2
    spread_same = p[:, None] * X2 - 2.0 * X * (Q @ X) + Q @ X2
    inner = (p[:, None] * spread_all - spread_same).sum(0) / n
    grad = 2.0 * w * (inner - lam)
    return float(p.mean() - lam * np.sum(w * w)), grad


def rank_nca(ds: Dataset, lam=None, iters=200, seed=0, tol=1e-10, zero_weight=1e-10) -> Ranking:
    """Feature weights maximizing the regularized leave-one-out NCA objective.

    ``F(w) = mean_i p_i - lam * sum_r w_r^2`` with
    ``d_w(x_i, x_j) = sum_r w_r^2 (x_ir - x_jr)^2`` and softmax neighbour
    probabilities.  Batch gradient ascent from ``w = 1`` with a backtracking
    step; the best iterate is kept.  Scores are ``w_r^2``, with values below
    ``zero_weight`` set to exactly zero so vanishing weights tie (and then
    fall back to index order).  ``lam`` defaults to ``1/n``.  The optimizer is
    deterministic; ``seed`` is accepted so every criterion shares one call
    signature.
    """
    del seed
    n = ds.n
    if lam is None:
        lam = 1.0 / n
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    X = np.asarray(ds.X, dtype=float)
    X2 = X * X
    y = ds.y
    same = (y[:, None] == y[None, :]).astype(float)
    w = np.ones(ds.d)
    f, g = _nca_value_and_grad(X, X2, same, w, lam)
    f0 = f
    step = 1.0
    it = 0
    for it in range(1, iters + 1):
        improved = False
        for _ in range(60):
            w_try = w + step * g
            f_try, g_try = _nca_value_and_grad(X, X2, same, w_try, lam)
            if f_try > f:
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        gain = f_try - f
        w, f, g = w_try, f_try, g_try
        step *= 2.0
        if gain <= tol * max(1.0, abs(f)):
            break
    scores = w * w
    scores[scores < zero_weight] = 0.0
    return Ranking(descending_order(scores), scores, NCA, (),
                   {"lambda": lam, "objective": f, "initial_objective": f0, "iterations": it,
                    "weights": w})


# ---------------------------------------------------------------------------

def rank_features(ds: Dataset, criterion: str, *, mrmr_bins=10, mrmr_select=None, nca_lambda=None,
                  nca_iters=200, seed=0) -> Ranking:
    """Dispatch on any of the seven criteria."""
    if criterion in _FILTERS:
        return rank_by_criterion(ds, criterion)
    if criterion == MRMR:
        return rank_mrmr(ds, mrmr_bins, mrmr_select)
    if criterion == NCA:
        return rank_nca(ds, nca_lambda, nca_iters, seed)
    raise ValueError(f"unknown criterion {criterion!r}")


def select_top(r: Ranking, m: int, ds: Dataset) -> Dataset:
    if m < 1:
        raise ValueError("m must be at least 1")
    if m > ds.d:
        raise ValueError(f"cannot select {m} of {ds.d} features")
    return ds.columns(r.order[:m])
