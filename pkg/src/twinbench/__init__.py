"""Twin-SVM family, oblique random forests and randomized networks with
filter feature selection, cross-validated grid evaluation and
Friedman/Nemenyi rank statistics."""

from .data import Dataset, FoldPlan, combine_modalities, load_csv, standardize, stratified_kfold
from .evaluation import CellResult, MetricSet, cross_validate, grid_evaluate, metrics
from .featsel import CRITERIA, rank_features, select_top

__version__ = "0.1.0"

__all__ = [
    "CRITERIA", "CellResult", "Dataset", "FoldPlan", "MetricSet", "combine_modalities", "cross_validate",
    "grid_evaluate", "load_csv", "metrics", "rank_features", "select_top", "standardize", "stratified_kfold",
]
