"""Metrics, cross-validation and grid evaluation of classifier pipelines."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from . import registry
from .data import PATIENT, Dataset, FoldPlan
from .data import standardize as _zscore
from .featsel import NCA, rank_features, Ranking

METRIC_NAMES = ("accuracy", "auc", "sensitivity", "specificity", "precision", "f_measure", "g_mean")


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("counts must be non-negative")

    @classmethod
    def from_labels(cls, y_true, y_pred):
        t = np.asarray(y_true) == PATIENT
        p = np.asarray(y_pred) == PATIENT
        if t.shape != p.shape:
            raise ValueError("label vectors differ in length")
        return cls(int(np.sum(t & p)), int(np.sum(~t & p)), int(np.sum(~t & ~p)), int(np.sum(t & ~p)))

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricSet:
    """Seven summary metrics; undefined entries are NaN."""

    accuracy: float
    auc: float
    sensitivity: float
    specificity: float
    precision: float
    f_measure: float
    g_mean: float

    def as_dict(self):
        return {k: getattr(self, k) for k in METRIC_NAMES}

    def undefined(self):
        return tuple(k for k in METRIC_NAMES if math.isnan(getattr(self, k)))

    @classmethod
    def nan(cls):
        return cls(*([math.nan] * len(METRIC_NAMES)))


def _ratio(a, b):
    return a / b if b > 0 else math.nan


def auc_score(scores, y):
    """Mann-Whitney AUC of ``scores`` for the patient class; ties score 1/2.

    NaN when either class is missing.
    """
    s = np.asarray(scores, dtype=float).ravel()
    pos = np.asarray(y).ravel() == PATIENT
    n1, n0 = int(pos.sum()), int((~pos).sum())
    if s.shape != pos.shape:
        raise ValueError("scores and labels differ in length")
    if n1 == 0 or n0 == 0:
        return math.nan
    r = rankdata(s)
    u = r[pos].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def metrics(c: ConfusionCounts, scores, y) -> MetricSet:
    if c.total == 0:
        raise ValueError("no samples to evaluate")
    acc = (c.tp + c.tn) / c.total
    sens = _ratio(c.tp, c.tp + c.fn)
    spec = _ratio(c.tn, c.tn + c.fp)
    prec = _ratio(c.tp, c.tp + c.fp)
    f = _ratio(2 * prec * sens, prec + sens) if not (math.isnan(prec) or math.isnan(sens)) else math.nan
    g = math.sqrt(sens * spec) if not (math.isnan(sens) or math.isnan(spec)) else math.nan
    return MetricSet(acc, auc_score(scores, y), sens, spec, prec, f, g)


def evaluate_predictions(y_true, labels, scores) -> MetricSet:
    return metrics(ConfusionCounts.from_labels(y_true, labels), scores, y_true)


def mean_metrics(folds):
    """Unweighted mean per metric over folds, skipping NaN entries.

    Returns ``(MetricSet, excluded)`` where ``excluded[name]`` counts the
    folds left out of that metric's mean.
    """
    vals = {}
    excluded = {}
    for k in METRIC_NAMES:
        col = np.array([getattr(m, k) for m in folds], dtype=float)
        ok = ~np.isnan(col)
        excluded[k] = int((~ok).sum())
        vals[k] = float(np.mean(col[ok])) if ok.any() else math.nan
    return MetricSet(**vals), excluded


# ---------------------------------------------------------------------------
# seeds
# ---------------------------------------------------------------------------

def derive_seed(*parts) -> int:
    """A 63-bit seed determined only by ``parts`` (stable across processes)."""
    text = "\x1f".join(repr(p) for p in parts).encode()
    return int.from_bytes(hashlib.sha256(text).digest()[:8], "little") >> 1


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Pipeline:
    """One lattice cell: criterion, number of kept features, classifier and
    its hyperparameters.  ``rank_options`` feeds the ranking step (only the
    NCA regularization exponent is used at present)."""

    criterion: str
    feature_count: int
    classifier: str
    hyper: dict = field(default_factory=dict)
    rank_options: dict = field(default_factory=dict)


@dataclass(frozen=True)
class GridPoint:
    hyper: dict
    rank_options: dict
    mean: MetricSet


@dataclass(frozen=True)
class CellResult:
    classifier: str
    criterion: str
    feature_count: int
    matter: str
    hyper: dict
    folds: tuple
    mean: MetricSet
    excluded: dict
    skipped_folds: tuple = ()
    rank_options: dict = field(default_factory=dict)
    rank_on_full: bool = False
    grid: tuple = ()


def _option_key(opts):
    return tuple(sorted(opts.items()))


class CvContext:
    """Fold splits, z-scored fold matrices and rankings shared by many cells.

    The ranking of a fold is computed once per ``(criterion, options)`` on the
    z-scored training split (or the z-scored full data under
    ``rank_on_full``).  Every filter criterion is invariant to per-feature
    affine maps, so z-scoring only matters for NCA, whose distance is
    scale-sensitive.
    """

    def __init__(self, ds: Dataset, plan: FoldPlan, standardize=True, rank_on_full=False,
                 mrmr_bins=10, nca_iters=200):
        if plan.assignments.shape[0] != ds.n:
            raise ValueError("fold plan does not match the dataset")
        self.ds = ds
        self.plan = plan
        self.standardize = standardize
        self.rank_on_full = rank_on_full
        self.mrmr_bins = mrmr_bins
        self.nca_iters = nca_iters
        self._folds = {}
        self._rankings = {}

    def fold(self, f):
        """``(train, test, train_z, test_z, usable)`` for fold ``f``."""
        if f not in self._folds:
            tr, te = self.plan.split(f)
            train, test = self.ds.rows(tr), self.ds.rows(te)
            usable = train.has_both_classes()
            if usable:
                train_z, test_z = _zscore(train, test)
            else:
                train_z, test_z = train, test
            self._folds[f] = (train, test, train_z, test_z, usable)
        return self._folds[f]

    def ranking(self, f, criterion, options=None) -> Ranking:
        # only NCA takes ranking options; other criteria share one ranking
        options = dict(options or {}) if criterion == NCA else {}
        where = "full" if self.rank_on_full else f
        key = (where, criterion, _option_key(options))
        if key not in self._rankings:
            if self.rank_on_full:
                base, _ = _zscore(self.ds, self.ds)
            else:
                base = self.fold(f)[2]
            self._rankings[key] = self._rank(base, criterion, options)
        return self._rankings[key]

    def _rank(self, ds, criterion, options):
        lam = None
        if criterion == NCA and "nca_exponent" in options:
            lam = 2.0 ** options["nca_exponent"] / ds.n
        return rank_features(ds, criterion, mrmr_bins=self.mrmr_bins, nca_lambda=lam, nca_iters=self.nca_iters)

    def preload(self, rankings):
        self._rankings.update(rankings)

    def rankings(self):
        return dict(self._rankings)


def cross_validate(ds: Dataset, plan: FoldPlan, pipeline: Pipeline, *, standardize=True, rank_on_full=False,
                   seed=0, context: CvContext | None = None) -> CellResult:
    """k-fold estimate of one pipeline.

    Per fold: rank on the training split, keep the top ``feature_count``
    features, z-score with training statistics (when ``standardize``), train
    and score the held-out fold.  A fold whose training split holds a single
    class is skipped: its MetricSet is all-NaN and its index is listed in
    ``skipped_folds``.  Classifier seeds depend on the cell coordinates and
    the fold only, never on the hyperparameters or the schedule.
    """
    ctx = context or CvContext(ds, plan, standardize, rank_on_full)
    spec = registry.get(pipeline.classifier)
    m = pipeline.feature_count
    if not 1 <= m <= ds.d:
        raise ValueError(f"feature_count must lie in [1, {ds.d}]")
    folds, skipped = [], []
    for f in range(plan.k):
        train, test, train_z, test_z, usable = ctx.fold(f)
        if not usable:
            folds.append(MetricSet.nan())
            skipped.append(f)
            continue
        r = ctx.ranking(f, pipeline.criterion, pipeline.rank_options)
        cols = r.order[:m]
        tr, te = (train_z, test_z) if ctx.standardize else (train, test)
        tr, te = tr.columns(cols), te.columns(cols)
        s = derive_seed(seed, ds.modality, pipeline.criterion, m, spec.label, plan.seed, f)
        model = spec.train(tr, pipeline.hyper, s)
        labels, scores = model.predict(te.X)
        folds.append(evaluate_predictions(te.y, labels, scores))
    mean, excluded = mean_metrics(folds)
    hyper = dict(spec.default)
    hyper.update(pipeline.hyper)
    return CellResult(spec.label, pipeline.criterion, m, ds.modality, hyper, tuple(folds), mean, excluded,
                      tuple(skipped), dict(pipeline.rank_options), ctx.rank_on_full)


def grid_evaluate(ds: Dataset, plan: FoldPlan, classifier, criterion, feature_count, grid=None, *,
                  rank_grid=None, standardize=True, rank_on_full=False, seed=0,
                  context: CvContext | None = None) -> CellResult:
    """Cross-validate every grid point and return the best by mean accuracy.

    ``grid`` is an ordered ``((name, values), ...)`` lattice (the classifier's
    default when omitted) or an explicit list of point dicts.  ``rank_grid``
    lists ranking-option dicts searched as the outer loop.  Ties keep the
    first point in canonical order (ranking options outermost, then the
    Cartesian product with the last parameter fastest); NaN accuracy never
    wins.  All grid points are kept in ``CellResult.grid``.
    """
    spec = registry.get(classifier)
    if grid is not None and len(grid) == 0:
        raise ValueError("grid must not be empty")
    if grid is not None and isinstance(grid[0], dict):
        points = [dict(p) for p in grid]
    else:
        points = spec.points(grid)
    rank_points = [dict(o) for o in ([{}] if rank_grid is None else rank_grid)]
    if not points or not rank_points:
        raise ValueError("grid must not be empty")
    ctx = context or CvContext(ds, plan, standardize, rank_on_full)
    best, audit = None, []
    for ropts in rank_points:
        for hyper in points:
            res = cross_validate(ds, plan, Pipeline(criterion, feature_count, spec.label, hyper, ropts),
                                 seed=seed, context=ctx)
            audit.append(GridPoint(res.hyper, res.rank_options, res.mean))
            acc = res.mean.accuracy
            if best is None or (not math.isnan(acc) and (math.isnan(best.mean.accuracy)
                                                         or acc > best.mean.accuracy)):
                best = res
    return CellResult(best.classifier, best.criterion, best.feature_count, best.matter, best.hyper, best.folds,
                      best.mean, best.excluded, best.skipped_folds, best.rank_options, best.rank_on_full,
                      tuple(audit))
