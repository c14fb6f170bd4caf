"""Linear and Gaussian kernels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LINEAR = "linear"
GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class KernelSpec:
    kind: str = LINEAR
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in (LINEAR, GAUSSIAN):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == GAUSSIAN and not self.gamma > 0:
            raise ValueError("gamma must be positive for the Gaussian kernel")

    @property
    def is_linear(self):
        return self.kind == LINEAR

    @classmethod
    def linear(cls):
        return cls(LINEAR)

    @classmethod
    def gaussian(cls, gamma):
        return cls(GAUSSIAN, float(gamma))


def sq_dists(A, C):
    """Pairwise squared Euclidean distances, clipped at zero."""
    aa = np.einsum("ij,ij->i", A, A)
    cc = np.einsum("ij,ij->i", C, C)
    D = aa[:, None] + cc[None, :] - 2.0 * (A @ C.T)
    return np.maximum(D, 0.0)


def gram(A, C, k: KernelSpec):
    """``K[i, j] = k(A_i, C_j)``; linear is ``A_i . C_j``, Gaussian is
    ``exp(-gamma ||A_i - C_j||^2)``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if A.shape[1] != C.shape[1]:
        raise ValueError(f"column mismatch: {A.shape[1]} vs {C.shape[1]}")
    if k.is_linear:
        return A @ C.T
    D = sq_dists(A, C)
    if A is C or (A.shape == C.shape and np.array_equal(A, C)):
        # self-Gram: exact zero self-distance and exact symmetry
        D = 0.5 * (D + D.T)
        np.fill_diagonal(D, 0.0)
    return np.exp(-k.gamma * D)
