"""SVM and the twin-SVM family (TWSVM, TBSVM, LSTSVM, RELSTSVM, Pin-GTSVM).

Class +1 (patient) owns plane 1, class -1 (control) owns plane 2.  For a
Gaussian kernel every model works on the rectangular kernel rows
``K(x, C)`` with ``C`` the stacked training points (patients first), so
"plane" coefficients live in kernel-coefficient space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import CONTROL, PATIENT, Dataset
from .kernels import KernelSpec, gram
from .numkit import BoxQp, solve_box_qp, solve_spd

EPS = 1e-7


@dataclass(frozen=True)
class Hyperplane:
    w: np.ndarray
    b: float

    def __post_init__(self):
        if not (np.all(np.isfinite(self.w)) and np.isfinite(self.b)):
            raise ValueError("hyperplane has non-finite entries")

    @property
    def v(self):
        """Augmented vector ``[w; b]``."""
        return np.append(self.w, self.b)

    @classmethod
    def from_augmented(cls, v):
        v = np.asarray(v, dtype=float)
        return cls(v[:-1].copy(), float(v[-1]))


@dataclass(frozen=True)
class TwinClassifier:
    plane1: Hyperplane
    plane2: Hyperplane
    kernel: KernelSpec
    reference: np.ndarray
    hyper: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict, compare=False)

    @property
    def kernelized(self):
        return self.reference.size > 0

    def features(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kernelized:
            if X.shape[1] != self.reference.shape[1]:
                raise ValueError(f"expected {self.reference.shape[1]} features, got {X.shape[1]}")
            return gram(X, self.reference, self.kernel)
        if X.shape[1] != self.plane1.w.shape[0]:
            raise ValueError(f"expected {self.plane1.w.shape[0]} features, got {X.shape[1]}")
        return X

    def decision(self, X):
        F = self.features(X)
        return F @ self.plane1.w + self.plane1.b, F @ self.plane2.w + self.plane2.b

    def plane_norms(self):
        if self.kernelized:
            K = gram(self.reference, self.reference, self.kernel)
            return tuple(float(np.sqrt(max(p.w @ K @ p.w, 1e-300))) for p in (self.plane1, self.plane2))
        return tuple(float(max(np.linalg.norm(p.w), 1e-300)) for p in (self.plane1, self.plane2))

    def predict(self, X, normalize=False):
        return predict_twin(self, X, normalize)


def predict_twin(m: TwinClassifier, X, normalize=False):
    """Assign each row to the nearer plane.

    Returns ``(labels, scores)``: label +1 when ``|f1| <= |f2|`` (ties go to
    the patient class) and score ``|f2| - |f1|``.  Distances are left
    unnormalized unless ``normalize`` is set.
    """
    f1, f2 = m.decision(X)
    d1, d2 = np.abs(f1), np.abs(f2)
    if normalize:
        n1, n2 = m.plane_norms()
        d1, d2 = d1 / n1, d2 / n2
    labels = np.where(d1 <= d2, PATIENT, CONTROL)
    return labels, d2 - d1


def _class_blocks(X, y, kernel: KernelSpec):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    X1, X2 = X[y == PATIENT], X[y == CONTROL]
    if X1.shape[0] == 0 or X2.shape[0] == 0:
        raise ValueError("both classes need at least one training point")
    if kernel.is_linear:
        F1, F2, ref = X1, X2, np.empty((0, X.shape[1]))
    else:
        ref = np.vstack([X1, X2])
        F1, F2 = gram(X1, ref, kernel), gram(X2, ref, kernel)
    H = np.hstack([F1, np.ones((F1.shape[0], 1))])
    G = np.hstack([F2, np.ones((F2.shape[0], 1))])
    return H, G, ref


def _xy(ds):
    return ds.X, ds.y


def _check_positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise ValueError(f"{k} must be positive, got {v}")


def _check_nonneg(**kw):
    for k, v in kw.items():
        if not v >= 0:
            raise ValueError(f"{k} must be non-negative, got {v}")


def _dual_plane(own, other, ridge, lower, upper, tol, max_iter):
    """Solve ``max e'a - 0.5 a' other (own'own + ridge I)^-1 other' a`` over a box.

    Returns ``(a, Z, solution, fallback)`` with ``Z = (own'own + ridge I)^-1 other'``
    so the augmented plane is ``+-Z a``.
    """
    p = own.shape[1]
    Z, fallback = solve_spd(own.T @ own + ridge * np.eye(p), other.T, full_output=True, warn=False)
    M = other @ Z
    M = 0.5 * (M + M.T)
    qp = BoxQp(M, np.ones(other.shape[0]), lower, upper)
    sol = solve_box_qp(qp, tol=tol, max_iter=max_iter)
    return sol.x, Z, sol, fallback


def fit_twsvm(X, y, c1=1.0, c2=1.0, kernel=KernelSpec(), *, ridge1=EPS, ridge2=EPS, c3=None,
              tol=1e-6, max_iter=5000, name="TWSVM", hyper=None):
    H, G, ref = _class_blocks(X, y, kernel)
    c3 = c2 if c3 is None else c3
    alpha, Z1, s1, f1 = _dual_plane(H, G, ridge1, 0.0, c1, tol, max_iter)
    gamma, Z2, s2, f2 = _dual_plane(G, H, ridge2, 0.0, c3, tol, max_iter)
    v1 = -Z1 @ alpha
    v2 = Z2 @ gamma
    info = {"alpha": alpha, "gamma": gamma, "dual_objectives": (s1.objective, s2.objective),
            "converged": s1.converged and s2.converged, "ridge_fallback": f1 or f2, "model": name}
    return TwinClassifier(Hyperplane.from_augmented(v1), Hyperplane.from_augmented(v2), kernel, ref,
                          hyper or {"c1": c1, "c2": c2}, info)


def train_twsvm(ds: Dataset, c1=1.0, c2=1.0, kernel=KernelSpec(), **kw) -> TwinClassifier:
    """Twin SVM: two box-constrained duals, each with an ``eps`` ridge on the
    inverted cross-product matrix."""
    _check_positive(c1=c1, c2=c2)
    return fit_twsvm(*_xy(ds), c1, c2, kernel, **kw)


def train_tbsvm(ds: Dataset, c1=1.0, c2=0.0, c3=1.0, c4=0.0, kernel=KernelSpec(), **kw) -> TwinClassifier:
    """Twin bounded SVM: as TWSVM but regularized by ``c2 I`` / ``c4 I``.

    A zero regularizer falls back to the ``eps`` ridge, which makes
    ``c2 = c4 = 0`` reproduce TWSVM exactly.
    """
    _check_positive(c1=c1, c3=c3)
    _check_nonneg(c2=c2, c4=c4)
    return fit_twsvm(*_xy(ds), c1, c3, kernel, ridge1=c2 if c2 > 0 else EPS, ridge2=c4 if c4 > 0 else EPS,
                     name="TBSVM", hyper={"c1": c1, "c2": c2, "c3": c3, "c4": c4}, **kw)


def _ls_plane(own, other, c, reg, rhs):
    """``(other'other + own'own / c + (reg / c + eps) I)^-1 other' rhs``."""
    p = own.shape[1]
    A = other.T @ other + own.T @ own / c + (reg / c + EPS) * np.eye(p)
    return solve_spd(A, other.T @ rhs, warn=False), A


def fit_relstsvm(X, y, c1=1.0, c2=0.0, c3=1.0, c4=0.0, E1=1.0, E2=1.0, kernel=KernelSpec(), name="RELSTSVM",
                 hyper=None):
    H, G, ref = _class_blocks(X, y, kernel)
    E1 = np.broadcast_to(np.asarray(E1, dtype=float), (G.shape[0],))
    E2 = np.broadcast_to(np.asarray(E2, dtype=float), (H.shape[0],))
    u1, A1 = _ls_plane(H, G, c1, c2, E1)
    u2, A2 = _ls_plane(G, H, c3, c4, E2)
    info = {"systems": ((A1, G.T @ E1), (A2, H.T @ E2)), "model": name}
    return TwinClassifier(Hyperplane.from_augmented(-u1), Hyperplane.from_augmented(u2), kernel, ref,
                          hyper or {"c1": c1, "c2": c2, "c3": c3, "c4": c4, "E1": float(E1.mean()),
                                    "E2": float(E2.mean())}, info)


def train_lstsvm(ds: Dataset, c1=1.0, c2=1.0, kernel=KernelSpec()) -> TwinClassifier:
    """Least-squares twin SVM; each plane is one SPD linear solve:

    ``[w1; b1] = -(G'G + H'H / c1 + eps I)^-1 G' e``,
    ``[w2; b2] = (H'H + G'G / c2 + eps I)^-1 H' e``.
    """
    _check_positive(c1=c1, c2=c2)
    return fit_relstsvm(*_xy(ds), c1, 0.0, c2, 0.0, 1.0, 1.0, kernel, name="LSTSVM",
                        hyper={"c1": c1, "c2": c2})


def train_relstsvm(ds: Dataset, c1=1.0, c2=0.0, c3=1.0, c4=0.0, E1=1.0, E2=1.0,
                   kernel=KernelSpec()) -> TwinClassifier:
    """Robust energy-based LSTSVM.

    ``v1 = -(c1 Q'Q + P'P + c2 I)^-1 c1 Q'E1`` and
    ``v2 = (c3 P'P + Q'Q + c4 I)^-1 c3 P'E2``; both are solved after dividing
    through by ``c1`` (resp. ``c3``) with the ``eps`` ridge added, so that
    ``E = 1, c2 = c4 = 0`` coincides with LSTSVM.  Scalar energies broadcast.
    """
    _check_positive(c1=c1, c3=c3)
    _check_nonneg(c2=c2, c4=c4)
    for E in (np.atleast_1d(E1), np.atleast_1d(E2)):
        if np.any(E <= 0) or np.any(E > 1):
            raise ValueError("energy parameters must lie in (0, 1]")
    return fit_relstsvm(*_xy(ds), c1, c2, c3, c4, E1, E2, kernel)


def fit_pingtsvm(X, y, c1=1.0, c2=1.0, tau1=0.05, tau2=0.05, kernel=KernelSpec(), tol=1e-6, max_iter=5000):
    H, G, ref = _class_blocks(X, y, kernel)
    s, Z1, r1, f1 = _dual_plane(H, G, EPS, -tau2 * c1, np.inf, tol, max_iter)
    t, Z2, r2, f2 = _dual_plane(G, H, EPS, -tau1 * c2, np.inf, tol, max_iter)
    info = {"s": s, "t": t, "dual_objectives": (r1.objective, r2.objective),
            "converged": r1.converged and r2.converged, "ridge_fallback": f1 or f2, "model": "PinGTSVM"}
    return TwinClassifier(Hyperplane.from_augmented(-Z1 @ s), Hyperplane.from_augmented(Z2 @ t), kernel, ref,
                          {"c1": c1, "c2": c2, "tau1": tau1, "tau2": tau2}, info)


def train_pingtsvm(ds: Dataset, c1=1.0, c2=1.0, tau1=0.05, tau2=0.05, kernel=KernelSpec(), **kw) -> TwinClassifier:
    """Pinball-loss general twin SVM.

    The duals are solved in the difference variable with only a lower bound
    (``s >= -tau2 c1``, ``t >= -tau1 c2``); a divergent dual raises
    :class:`~twinbench.numkit.QpUnbounded`.
    """
    _check_positive(c1=c1, c2=c2)
    for name, tau in (("tau1", tau1), ("tau2", tau2)):
        if not 0.0 <= tau <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")
    return fit_pingtsvm(*_xy(ds), c1, c2, tau1, tau2, kernel, **kw)


# ---------------------------------------------------------------------------
# Standard SVM
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SvmClassifier:
    alpha: np.ndarray
    labels: np.ndarray
    points: np.ndarray
    kernel: KernelSpec
    C: float
    converged: bool = True

    def decision(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.points.shape[1]:
            raise ValueError(f"expected {self.points.shape[1]} features, got {X.shape[1]}")
        if self.alpha.size == 0:
            return np.zeros(X.shape[0])
        return (gram(X, self.points, self.kernel) + 1.0) @ (self.alpha * self.labels)

    def predict(self, X):
        f = self.decision(X)
        return np.where(f >= 0, PATIENT, CONTROL), f


def fit_svm(X, y, C=1.0, kernel=KernelSpec(), tol=1e-6, max_iter=5000) -> SvmClassifier:
    """Bias-absorbed soft-margin SVM dual (kernel ``K + 1``, ``0 <= a <= C``)."""
    _check_positive(C=C)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.any(y == PATIENT) and np.any(y == CONTROL)):
        raise ValueError("both classes need at least one training point")
    K = gram(X, X, kernel) + 1.0
    Q = (y[:, None] * y[None, :]) * K
    Q = 0.5 * (Q + Q.T)
    sol = solve_box_qp(BoxQp(Q, np.ones(len(y)), 0.0, C), tol=tol, max_iter=max_iter)
    keep = sol.x > 0
    return SvmClassifier(sol.x[keep], y[keep], X[keep], kernel, C, sol.converged)


def train_svm(ds: Dataset, C=1.0, kernel=KernelSpec(), **kw) -> SvmClassifier:
    return fit_svm(ds.X, ds.y, C, kernel, **kw)
