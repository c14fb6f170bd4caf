"""Synthetic stand-ins for voxel feature matrices."""

from __future__ import annotations

import numpy as np

from .data import CONTROL, PATIENT, Dataset


def _labels(n_pos, n_neg):
    return np.r_[np.full(n_pos, PATIENT), np.full(n_neg, CONTROL)]


def gaussian_blobs(n=100, d=10, shift=1.0, seed=0, modality="GM"):
    """Two isotropic unit-variance blobs centred at ``+shift`` and ``-shift``
    in every coordinate (first half patients)."""
    rng = np.random.default_rng(seed)
    n_pos = n // 2
    X = np.vstack([rng.normal(shift, 1.0, (n_pos, d)), rng.normal(-shift, 1.0, (n - n_pos, d))])
    return Dataset(X, _labels(n_pos, n - n_pos), modality=modality)


def informative_noise(n=100, n_informative=5, n_noise=95, effect=1.5, seed=0, modality="GM", shuffle=True):
    """``n_informative`` columns whose class means differ by ``effect`` plus
    pure-noise columns.  Returns ``(ds, informative_indices)``; with
    ``shuffle`` the informative columns are scattered among the noise."""
    rng = np.random.default_rng(seed)
    n_pos = n // 2
    y = _labels(n_pos, n - n_pos)
    d = n_informative + n_noise
    X = rng.normal(size=(n, d))
    X[:n_pos, :n_informative] += effect / 2
    X[n_pos:, :n_informative] -= effect / 2
    perm = rng.permutation(d) if shuffle else np.arange(d)
    X = X[:, np.argsort(perm)]
    informative = np.sort(perm[:n_informative]) if shuffle else np.arange(n_informative)
    # column j of the output is column argsort(perm)[j] of the input, so the
    # informative input column i sits at output position perm[i]
    return Dataset(X, y, modality=modality), informative


def paired_modalities(n=60, d_gm=40, d_wm=30, n_informative=4, effect=1.2, seed=0):
    """GM/WM-shaped pair sharing subjects and labels, each with a few informative columns."""
    gm, _ = informative_noise(n, n_informative, d_gm - n_informative, effect, seed, "GM")
    wm, _ = informative_noise(n, n_informative, d_wm - n_informative, effect, seed + 1, "WM")
    sids = tuple(f"s{i:04d}" for i in range(n))
    gm = Dataset(gm.X, gm.y, tuple(f"gm{j}" for j in range(d_gm)), "GM", sids)
    wm = Dataset(wm.X, gm.y, tuple(f"wm{j}" for j in range(d_wm)), "WM", sids)
    return gm, wm
