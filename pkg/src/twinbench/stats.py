"""Friedman rank test, Iman-Davenport correction and Nemenyi critical
difference for comparing k classifiers over N datasets (here: feature
selection techniques)."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats as _sps

# Studentized range quantile / sqrt(2), infinite degrees of freedom, k = 2..20
Q_TABLE = {
    0.05: (1.960, 2.344, 2.569, 2.728, 2.850, 2.948, 3.031, 3.102, 3.164, 3.219,
           3.268, 3.313, 3.354, 3.391, 3.426, 3.458, 3.489, 3.517, 3.544),
    0.10: (1.645, 2.052, 2.291, 2.460, 2.589, 2.693, 2.780, 2.855, 2.920, 2.978,
           3.030, 3.077, 3.120, 3.159, 3.196, 3.230, 3.261, 3.291, 3.319),
}

SMALL_SAMPLE_NOTE = ("chi-square approximation assumes N > 10 and k > 5; "
                     "the statistic is reported regardless")


class StatsError(ValueError):
    pass


def q_alpha(k, alpha=0.05):
    """Two-tailed Nemenyi critical value for ``k`` algorithms.

    Looked up in :data:`Q_TABLE` for ``k <= 20`` and the tabulated alphas,
    otherwise computed from the studentized range distribution.
    """
    if k < 2:
        raise StatsError("need at least two algorithms")
    table = Q_TABLE.get(round(alpha, 10))
    if table is not None and k - 2 < len(table):
        return table[k - 2]
    if not 0 < alpha < 1:
        raise StatsError("alpha must lie in (0, 1)")
    return float(_sps.studentized_range.ppf(1 - alpha, k, np.inf) / math.sqrt(2))


@dataclass(frozen=True)
class RankMatrix:
    scores: np.ndarray
    ranks: np.ndarray
    avg_ranks: np.ndarray
    dropped_rows: tuple = ()

    @property
    def N(self):
        return self.ranks.shape[0]

    @property
    def k(self):
        return self.ranks.shape[1]


def rank_algorithms(scores) -> RankMatrix:
    """Per-row mid-ranks with rank 1 for the highest score.

    Rows containing NaN are dropped (with a warning) and listed in
    ``dropped_rows``.
    """
    S = np.atleast_2d(np.asarray(scores, dtype=float))
    if S.size == 0 or S.ndim != 2:
        raise StatsError("empty score matrix")
    bad = np.isnan(S).any(axis=1)
    if bad.any():
        warnings.warn(f"dropping {int(bad.sum())} row(s) with missing scores", stacklevel=2)
    S = S[~bad]
    if S.shape[0] == 0:
        raise StatsError("no complete rows left")
    R = np.vstack([_sps.rankdata(-row) for row in S])
    return RankMatrix(S, R, R.mean(axis=0), tuple(int(i) for i in np.flatnonzero(bad)))


def friedman_chi2(rm: RankMatrix) -> float:
    N, k = rm.N, rm.k
    if k < 2:
        raise StatsError("Friedman test needs k >= 2")
    if N < 2:
        raise StatsError("Friedman test needs N >= 2")
    R = rm.avg_ranks
    return float(12.0 * N / (k * (k + 1)) * (np.sum(R * R) - k * (k + 1) ** 2 / 4.0))


def iman_davenport(chi2, N, k) -> float:
    den = N * (k - 1) - chi2
    if den <= 0:
        raise StatsError(f"F_F undefined: N(k-1) = {N * (k - 1)} <= chi2 = {chi2}")
    return float((N - 1) * chi2 / den)


def nemenyi_cd(k, N, q) -> float:
    if q <= 0:
        raise StatsError("q_alpha must be positive")
    if k < 1 or N < 1:
        raise StatsError("k and N must be positive")
    return float(q * math.sqrt(k * (k + 1) / (6.0 * N)))


def significant_pairs(avg_ranks, cd):
    """Index pairs ``(i, j)`` with ``R_j - R_i >= cd``, so ``i`` ranks better."""
    R = np.asarray(avg_ranks, dtype=float)
    return [(i, j) for i in range(R.size) for j in range(R.size) if R[j] - R[i] >= cd]


@dataclass(frozen=True)
class FriedmanReport:
    names: tuple
    rank_matrix: RankMatrix
    chi2: float
    chi2_p: float
    ff: float
    ff_p: float
    alpha: float
    q: float
    cd: float
    pairs: tuple
    notes: tuple = ()

    @property
    def reject(self):
        return self.ff_p < self.alpha

    def significance_table(self):
        """Better-ranked models as rows, worse ones as columns, ``Yes``/``No`` cells.

        Only models that take part in at least one significant pair appear.
        """
        rows = sorted({i for i, _ in self.pairs}, key=lambda i: self.rank_matrix.avg_ranks[i])
        cols = sorted({j for _, j in self.pairs}, key=lambda j: self.rank_matrix.avg_ranks[j])
        sig = set(self.pairs)
        return ([self.names[j] for j in cols],
                [(self.names[i], ["Yes" if (i, j) in sig else "No" for j in cols]) for i in rows])


def friedman_report(scores, names=None, alpha=0.05, q=None) -> FriedmanReport:
    """Full omnibus plus post-hoc analysis of an ``N x k`` score matrix."""
    rm = rank_algorithms(scores)
    N, k = rm.N, rm.k
    names = tuple(names) if names is not None else tuple(f"A{j + 1}" for j in range(k))
    if len(names) != k:
        raise StatsError(f"{k} columns but {len(names)} names")
    chi2 = friedman_chi2(rm)
    notes = []
    if not (N > 10 and k > 5):
        notes.append(SMALL_SAMPLE_NOTE)
    try:
        ff = iman_davenport(chi2, N, k)
        ff_p = float(_sps.f.sf(ff, k - 1, (k - 1) * (N - 1)))
    except StatsError as e:
        # every row ranks the algorithms identically
        ff, ff_p = math.inf, 0.0
        notes.append(str(e))
    q = q_alpha(k, alpha) if q is None else q
    cd = nemenyi_cd(k, N, q)
    return FriedmanReport(names, rm, chi2, float(_sps.chi2.sf(chi2, k - 1)), ff, ff_p, alpha, q, cd,
                          tuple(significant_pairs(rm.avg_ranks, cd)), tuple(notes))
