"""Named classifier configurations and their default hyperparameter grids.

Each :class:`ClassifierSpec` bundles a trainer ``fit(ds, hyper, seed)``
returning a model whose ``predict(X)`` gives ``(labels, scores)``, the
hyperparameter lattice searched by :func:`twinbench.evaluation.grid_evaluate`
and a default point used when no search is wanted.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import forests, shallow, svmfam
from .data import CONTROL, PATIENT, Dataset
from .kernels import KernelSpec

PENALTY_GRID = tuple(10.0 ** i for i in range(-5, 6))
GAMMA_GRID = tuple(2.0 ** i for i in range(-10, 11))
ENERGY_GRID = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
RVFL_C_GRID = tuple(range(-5, 15))
RVFL_N_GRID = tuple(range(3, 204, 20))
NCA_EXPONENTS = tuple(range(1, 21))
N_TREES = 100
PIN_TAU = 0.05
KNN_K = 5
MLP_HIDDEN_GRID = (32, 64, 128)

LIN, NL = "lin", "nl"
FAMILIES = ("SVM-family", "RaF-family", "Neural networks", "KNN", "KRR")


@dataclass(frozen=True)
class ClassifierSpec:
    """One row of the result tables.

    ``grid`` is an ordered tuple of ``(name, values)``; grid points enumerate
    the Cartesian product with the last parameter varying fastest, which is
    the canonical order used for tie-breaking.
    """

    key: str
    label: str
    family: str
    table: str
    fit: Callable = field(repr=False, compare=False)
    grid: tuple = ()
    default: dict = field(default_factory=dict)

    def points(self, grid=None):
        grid = self.grid if grid is None else tuple(grid)
        if not grid:
            return [dict(self.default)]
        names = [g[0] for g in grid]
        out = []
        for combo in itertools.product(*(g[1] for g in grid)):
            point = dict(self.default)
            point.update(zip(names, combo))
            out.append(point)
        return out

    def train(self, ds: Dataset, hyper=None, seed=0):
        h = dict(self.default)
        h.update(hyper or {})
        return self.fit(ds, h, seed)


def _kernel(h):
    return KernelSpec.gaussian(h["gamma"]) if "gamma" in h else KernelSpec.linear()


@dataclass(frozen=True)
class MajorityModel:
    """Predicts the training majority class (ties go to the patient class)."""

    label: int

    def predict(self, X):
        n = np.atleast_2d(X).shape[0]
        return np.full(n, self.label), np.full(n, 1.0 if self.label == PATIENT else 0.0)


def _fit_majority(ds, h, seed):
    pos, neg = ds.class_counts()
    return MajorityModel(PATIENT if pos >= neg else CONTROL)


def _twsvm(ds, h, seed):
    return svmfam.train_twsvm(ds, h["c1"], h["c2"], _kernel(h))


def _tbsvm(ds, h, seed):
    return svmfam.train_tbsvm(ds, h["c1"], h["c2"], h["c1"], h["c2"], _kernel(h))


def _lstsvm(ds, h, seed):
    return svmfam.train_lstsvm(ds, h["c1"], h["c2"], _kernel(h))


def _relstsvm(ds, h, seed):
    return svmfam.train_relstsvm(ds, h["c1"], h["c2"], h["c1"], h["c2"], h["E"], h["E"], _kernel(h))


def _pingtsvm(ds, h, seed):
    return svmfam.train_pingtsvm(ds, h["c1"], h["c2"], h["tau"], h["tau"], _kernel(h))


def _svm(ds, h, seed):
    return svmfam.train_svm(ds, h["C"], _kernel(h))


def _krr(ds, h, seed):
    return shallow.train_krr(ds, h["lam"], _kernel(h))


def _knn(ds, h, seed):
    return shallow.KnnModel(ds, h["k"])


def _mlp(ds, h, seed):
    return shallow.train_mlp(ds, hidden=h["hidden"], epochs=h["epochs"], lr=h["lr"], seed=seed)


def _rvfl(ds, h, seed):
    return shallow.train_rvfl(ds, N=h["N"], C_exp=h["C"], S=h["S"], seed=seed)


def _rvfl_ae(ds, h, seed):
    return shallow.train_rvfl_ae(ds, N=h["N"], C_exp=h["C"], S=h["S"], seed=seed)


def _forest(variant):
    def fit(ds, h, seed):
        return forests.train_forest(ds, variant, n_trees=h["n_trees"], seed=seed)
    return fit


_C12 = (("c1", PENALTY_GRID), ("c2", PENALTY_GRID))
_G = (("gamma", GAMMA_GRID),)
_TWIN_DEFAULT = {"c1": 1.0, "c2": 1.0}
_GAMMA_DEFAULT = 2.0 ** -5


def _specs():
    twin = [
        ("twsvm", "TWSVM", _twsvm, _C12, _TWIN_DEFAULT),
        ("tbsvm", "TBSVM", _tbsvm, _C12, _TWIN_DEFAULT),
        ("lstsvm", "LSTWSVM", _lstsvm, _C12, _TWIN_DEFAULT),
        ("relstsvm", "RELSTSVM", _relstsvm, _C12 + (("E", ENERGY_GRID),), {**_TWIN_DEFAULT, "E": 1.0}),
    ]
    out = []
    for key, label, fit, grid, default in twin:
        out.append(ClassifierSpec(f"{key}-lin", f"{label} (Linear)", "SVM-family", LIN, fit, grid, dict(default)))
        out.append(ClassifierSpec(f"{key}-nl", f"{label} (Non-Linear)", "SVM-family", NL, fit, grid + _G,
                                  {**default, "gamma": _GAMMA_DEFAULT}))
    out += [
        ClassifierSpec("krr-lin", "KRR (Linear)", "KRR", LIN, _krr, (("lam", PENALTY_GRID),), {"lam": 1.0}),
        ClassifierSpec("krr-nl", "KRR (Non-Linear)", "KRR", NL, _krr, (("lam", PENALTY_GRID),) + _G,
                       {"lam": 1.0, "gamma": _GAMMA_DEFAULT}),
        ClassifierSpec("svm", "SVM", "SVM-family", LIN, _svm, (("C", PENALTY_GRID),), {"C": 1.0}),
        ClassifierSpec("pingtsvm", "pinGTSVM", "SVM-family", LIN, _pingtsvm, _C12,
                       {**_TWIN_DEFAULT, "tau": PIN_TAU}),
        ClassifierSpec("knn", "KNN", "KNN", LIN, _knn, (), {"k": KNN_K}),
        ClassifierSpec("neural", "Neural", "Neural networks", LIN, _mlp, (("hidden", MLP_HIDDEN_GRID),),
                       {"hidden": 64, "epochs": 200, "lr": 1e-3}),
        ClassifierSpec("rvfl", "RVFL", "Neural networks", LIN, _rvfl,
                       (("C", RVFL_C_GRID), ("N", RVFL_N_GRID)), {"C": 0, "N": 103, "S": 1.0}),
        ClassifierSpec("rvflae", "RVFLAE", "Neural networks", LIN, _rvfl_ae,
                       (("C", RVFL_C_GRID), ("N", RVFL_N_GRID)), {"C": 0, "N": 103, "S": 1.0}),
    ]
    for variant, label in (("RaF", "RaF"), ("MPRaF_T", "MPRaF-T"), ("MPRaF_P", "MPRaF-P"),
                           ("MPRaF_N", "MPRaF-N"), ("Het", "Het-RaF"), ("RaF_LDA", "RaF-LDA"),
                           ("RaF_PCA", "RaF-PCA")):
        out.append(ClassifierSpec(label.lower(), label, "RaF-family", LIN, _forest(variant), (),
                                  {"n_trees": N_TREES}))
    return out


_TABLE = _specs()
# configurations outside the 23 published rows, available on request
EXTRAS = (
    ClassifierSpec("svm-nl", "SVM (Non-Linear)", "SVM-family", NL, _svm, (("C", PENALTY_GRID),) + _G,
                   {"C": 1.0, "gamma": _GAMMA_DEFAULT}),
    ClassifierSpec("pingtsvm-nl", "pinGTSVM (Non-Linear)", "SVM-family", NL, _pingtsvm, _C12 + _G,
                   {**_TWIN_DEFAULT, "tau": PIN_TAU, "gamma": _GAMMA_DEFAULT}),
    ClassifierSpec("majority", "Majority", "baseline", LIN, _fit_majority, (), {}),
)

# row order of the published tables
TABLE_ORDER = ("Het-RaF", "KNN", "KRR (Linear)", "KRR (Non-Linear)", "LSTWSVM (Linear)", "LSTWSVM (Non-Linear)",
               "MPRaF-N", "MPRaF-P", "MPRaF-T", "Neural", "pinGTSVM", "RaF-LDA", "RaF-PCA", "RaF",
               "RELSTSVM (Linear)", "RELSTSVM (Non-Linear)", "RVFLAE", "RVFL", "SVM", "TBSVM (Linear)",
               "TBSVM (Non-Linear)", "TWSVM (Linear)", "TWSVM (Non-Linear)")

_BY_LABEL = {s.label: s for s in (*_TABLE, *EXTRAS)}
_BY_KEY = {s.key: s for s in (*_TABLE, *EXTRAS)}
TABLE_CLASSIFIERS = tuple(_BY_LABEL[name] for name in TABLE_ORDER)


def get(name) -> ClassifierSpec:
    """Look a classifier up by display label (``"TBSVM (Non-Linear)"``) or key (``"tbsvm-nl"``)."""
    if isinstance(name, ClassifierSpec):
        return name
    spec = _BY_LABEL.get(name) or _BY_KEY.get(str(name).lower())
    if spec is None:
        raise KeyError(f"unknown classifier {name!r}")
    return spec


def all_specs():
    return (*TABLE_CLASSIFIERS, *EXTRAS)


def parse_grid(spec: ClassifierSpec, overrides):
    """Turn a ``{param: [values]}`` mapping into an ordered grid.

    Parameters keep the default grid's order; new names are appended in the mapping's
    order.  Parameters absent from ``overrides`` keep their default grids.
    """
    if overrides is None:
        return spec.grid
    overrides = dict(overrides)
    grid = []
    for name, values in spec.grid:
        grid.append((name, tuple(overrides.pop(name, values))))
    for name, values in overrides.items():
        if name not in spec.default:
            raise KeyError(f"{spec.label} has no hyperparameter {name!r}")
        grid.append((name, tuple(values)))
    for name, values in grid:
        if len(values) == 0:
            raise ValueError(f"empty grid for {spec.label}:{name}")
    return tuple(grid)
