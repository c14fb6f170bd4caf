"""Datasets, CSV ingestion, modality fusion, stratified folds, z-scoring."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MODALITIES = ("GM", "WM", "CM")
PATIENT, CONTROL = 1, -1


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """``n x d`` feature matrix with labels in {+1 (patient), -1 (control)}."""

    X: np.ndarray
    y: np.ndarray
    feature_ids: tuple = ()
    modality: str = "GM"
    subject_ids: tuple = field(default=(), compare=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise DataError("X must be two-dimensional")
        y = np.asarray(self.y).astype(int).ravel()
        if y.shape[0] != X.shape[0]:
            raise DataError(f"{X.shape[0]} rows but {y.shape[0]} labels")
        if not np.all(np.isin(y, (PATIENT, CONTROL))):
            raise DataError("labels must be +1 or -1")
        fids = tuple(self.feature_ids) or tuple(f"f{j}" for j in range(X.shape[1]))
        if len(fids) != X.shape[1]:
            raise DataError(f"{X.shape[1]} columns but {len(fids)} feature ids")
        if self.modality not in MODALITIES:
            raise DataError(f"unknown modality {self.modality!r}")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_ids", fids)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def class_counts(self):
        return int(np.sum(self.y == PATIENT)), int(np.sum(self.y == CONTROL))

    def has_both_classes(self):
        pos, neg = self.class_counts()
        return pos > 0 and neg > 0

    def rows(self, idx):
        idx = np.asarray(idx)
        sids = tuple(np.asarray(self.subject_ids, dtype=object)[idx]) if self.subject_ids else ()
        return Dataset(self.X[idx], self.y[idx], self.feature_ids, self.modality, sids)

    def columns(self, idx):
        idx = np.asarray(idx, dtype=int)
        fids = tuple(self.feature_ids[j] for j in idx)
        return Dataset(self.X[:, idx], self.y, fids, self.modality, self.subject_ids)

    def with_X(self, X):
        return Dataset(X, self.y, self.feature_ids, self.modality, self.subject_ids)


def load_csv(path, label_column="label", modality="GM", id_column="subject_id"):
    """Read a feature CSV.

    The header row is required.  An optional ``subject_id`` column is kept as
    identifiers, the label column may use {1, -1} or {1, 0} (0 becomes -1) and
    every other column must be numeric.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        rows = list(reader)
    if label_column not in header:
        raise DataError(f"label column {label_column!r} not found in {path}")
    li = header.index(label_column)
    ii = header.index(id_column) if id_column in header else None
    feat_cols = [j for j in range(len(header)) if j not in (li, ii)]

    X = np.empty((len(rows), len(feat_cols)))
    y = np.empty(len(rows), dtype=int)
    sids = []
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"row {r + 1} has {len(row)} cells, header has {len(header)}")
        for out, j in enumerate(feat_cols):
            X[r, out] = _cell(row[j], r + 1, j)
        lab = _cell(row[li], r + 1, li)
        if lab == 1:
            y[r] = PATIENT
        elif lab in (0, -1):
            y[r] = CONTROL
        else:
            raise DataError(f"label {row[li]!r} at row {r + 1} is not in {{1, 0, -1}}")
        if ii is not None:
            sids.append(row[ii].strip())
    ds = Dataset(X, y, tuple(header[j] for j in feat_cols), modality, tuple(sids))
    if not ds.has_both_classes():
        raise DataError(f"{path} holds a single class")
    return ds


def _cell(text, row, col):
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"non-numeric cell at ({row},{col})") from None
    if not math.isfinite(v):
        raise DataError(f"non-numeric cell at ({row},{col})")
    return v


def combine_modalities(gm: Dataset, wm: Dataset) -> Dataset:
    """Column-concatenate grey- and white-matter features of the same subjects."""
    if gm.n != wm.n:
        raise DataError(f"subject count mismatch: {gm.n} vs {wm.n}")
    if gm.subject_ids and wm.subject_ids and gm.subject_ids != wm.subject_ids:
        raise DataError("subject identifiers differ between modalities")
    if not np.array_equal(gm.y, wm.y):
        raise DataError("labels differ between modalities")
    return Dataset(np.hstack([gm.X, wm.X]), gm.y, gm.feature_ids + wm.feature_ids, "CM",
                   gm.subject_ids or wm.subject_ids)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def split(self, fold):
        test = np.flatnonzero(self.assignments == fold)
        train = np.flatnonzero(self.assignments != fold)
        return train, test

    def __iter__(self):
        return (self.split(f) for f in range(self.k))


def stratified_kfold(ds: Dataset, k=10, seed=0) -> FoldPlan:
    """Seeded shuffle within each class, then round-robin fold assignment.

    The round-robin position carries over from one class to the next, so
    fold sizes differ by at most one as well as per-class counts.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    rng = np.random.default_rng(seed)
    assign = np.empty(ds.n, dtype=int)
    offset = 0
    for label in (PATIENT, CONTROL):
        members = np.flatnonzero(ds.y == label)
        if members.size < k:
            raise DataError(f"class {label:+d} has {members.size} members, fewer than k={k}")
        members = rng.permutation(members)
        assign[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    assign.setflags(write=False)
    return FoldPlan(k, assign, seed)


def standardize(train: Dataset, apply_to: Dataset):
    """z-score both datasets with the train column mean/std (ddof=0).

    Columns whose train std is below 1e-12 become zero in both outputs.
    """
    if train.d != apply_to.d:
        raise DataError("feature count mismatch")
    mu = train.X.mean(axis=0)
    sd = train.X.std(axis=0)
    dead = sd < 1e-12
    sd = np.where(dead, 1.0, sd)

    def z(X):
        Z = (X - mu) / sd
        Z[:, dead] = 0.0
        return Z

    return train.with_X(z(train.X)), apply_to.with_X(z(apply_to.X))


def write_csv(ds: Dataset, path, label_column="label", id_column="subject_id"):
    """Inverse of :func:`load_csv` (floats written with ``repr`` so they round-trip)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sids = ds.subject_ids or tuple(f"s{i:04d}" for i in range(ds.n))
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([id_column, label_column, *ds.feature_ids])
        for sid, lab, row in zip(sids, ds.y, ds.X):
            w.writerow([sid, int(lab), *(repr(float(v)) for v in row)])
    return path
