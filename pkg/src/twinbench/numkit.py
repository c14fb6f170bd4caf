"""Dense numerical kernels shared by every model.

All routines are pure functions of their inputs and operate on small, dense
``numpy`` arrays: SPD solves with a ridge fallback, a box-constrained convex
QP solver, a generalized symmetric eigensolver built on cyclic Jacobi
rotations, and FISTA for l1-regularized least squares.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

RIDGE = 1e-7
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 5000


class SolverWarning(UserWarning):
    """Raised (as a warning) when a numerical fallback was taken."""


class QpUnbounded(RuntimeError):
    """The quadratic program has an unbounded descent direction."""


def _as_finite(a, name):
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


# ---------------------------------------------------------------------------
# Linear systems
# ---------------------------------------------------------------------------

def solve_spd(A, b, full_output=False, warn=True):
    """Solve ``A x = b`` for symmetric positive (semi-)definite ``A``.

    A Cholesky factorization is attempted first.  If ``A`` is singular (the
    factorization fails or the residual is unacceptable) the system is
    re-solved with ``A + 1e-7 I``.

    Parameters
    ----------
    A : array_like, shape (n, n)
    b : array_like, shape (n,) or (n, k)
    full_output : bool
        If True also return a flag telling whether the ridge fallback was used.
    warn : bool
        Emit a :class:`SolverWarning` when the fallback is taken.

    Returns
    -------
    x : ndarray
    used_ridge : bool
        Only when ``full_output`` is True.
    """
    A = _as_finite(A, "A")
    b = _as_finite(b, "b")
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got shape {A.shape}")
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, b is {b.shape}")

    bnorm = np.max(np.abs(b)) if b.size else 0.0
    x = _cholesky_solve(A, b)
    used_ridge = False
    if x is None or _residual(A, x, b) > 1e-8 * (1.0 + bnorm):
        used_ridge = True
        Ar = A + RIDGE * np.eye(A.shape[0])
        x = _cholesky_solve(Ar, b)
        if x is None:
            # indefinite even after the ridge: least squares is the last resort
            x = np.linalg.lstsq(Ar, b, rcond=None)[0]
        if warn:
            warnings.warn("singular system, solved with ridge 1e-7*I", SolverWarning, stacklevel=2)
    if full_output:
        return x, used_ridge
    return x


def _cholesky_solve(A, b):
    try:
        factor = linalg.cho_factor(A, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return None
    x = linalg.cho_solve(factor, b, check_finite=False)
    if not np.all(np.isfinite(x)):
        return None
    # one step of iterative refinement
    r = b - A @ x
    x = x + linalg.cho_solve(factor, r, check_finite=False)
    return x


def _residual(A, x, b):
    return float(np.max(np.abs(A @ x - b))) if b.size else 0.0


# ---------------------------------------------------------------------------
# Box-constrained QP
# ---------------------------------------------------------------------------

@dataclass
class BoxQp:
    """``min 0.5 x'Mx - q'x  s.t.  lower <= x <= upper``.

    Infinite bounds are allowed on either side.
    """

    M: np.ndarray
    q: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.M = _as_finite(self.M, "M")
        self.q = _as_finite(self.q, "q").ravel()
        n = self.q.shape[0]
        if self.M.shape != (n, n):
            raise ValueError(f"M must be {n}x{n}, got {self.M.shape}")
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ValueError("bounds must not be NaN")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        scale = max(1.0, float(np.max(np.abs(self.M)))) if n else 1.0
        if n and np.max(np.abs(self.M - self.M.T)) > 1e-10 * scale:
            raise ValueError("M is not symmetric")

    @property
    def n(self):
        return self.q.shape[0]

    def objective(self, x):
        return 0.5 * float(x @ self.M @ x) - float(self.q @ x)

    def project(self, x):
        return np.clip(x, self.lower, self.upper)


@dataclass
class QpSolution:
    x: np.ndarray
    objective: float
    iterations: int
    converged: bool
    pg_norm: float = field(default=np.nan)


def projected_gradient_norm(p: BoxQp, x):
    g = p.M @ x - p.q
    return float(np.max(np.abs(x - p.project(x - g)))) if p.n else 0.0


def solve_box_qp(p: BoxQp, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, x0=None):
    """Projected gradient with Barzilai-Borwein steps and active-set polishing.

    Each iteration moves along the projected BB direction with an exact line
    search (the objective is quadratic), so the objective never increases.
    Every few iterations the current active set is frozen and the free
    variables are solved for exactly; the polished point is kept when it
    lowers the objective.  Convergence is declared once the infinity norm of
    the projected gradient ``x - P(x - grad)`` is at most ``tol``.

    Raises
    ------
    ValueError
        If ``M`` is not positive semidefinite (beyond round-off).
    QpUnbounded
        If the iterates diverge along an unbounded direction.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = p.n
    if n == 0:
        return QpSolution(np.zeros(0), 0.0, 0, True, 0.0)
    M, q = p.M, p.q
    eig = np.linalg.eigvalsh(0.5 * (M + M.T))
    if eig[0] < -1e-8 * max(1.0, abs(eig[-1])):
        raise ValueError(f"M is not positive semidefinite (min eigenvalue {eig[0]:.3e})")
    lmax = max(float(eig[-1]), 1e-12)

    x = p.project(np.zeros(n) if x0 is None else np.asarray(x0, dtype=float))
    g = M @ x - q
    alpha = 1.0 / lmax
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        pg = np.max(np.abs(x - p.project(x - g)))
        if pg <= tol:
            converged = True
            it -= 1
            break
        if it % 10 == 0:
            x, g = _polish(p, x, g)
            if np.max(np.abs(x - p.project(x - g))) <= tol:
                converged = True
                break
        d = p.project(x - alpha * g) - x
        Md = M @ d
        dMd = float(d @ Md)
        gd = float(g @ d)
        if gd >= 0:
            # BB step too long to make progress; fall back to the safe step
            alpha = 1.0 / lmax
            continue
        t = 1.0 if dMd <= 0 else min(1.0, -gd / dMd)
        s = t * d
        x = p.project(x + s)
        g_new = M @ x - q
        y = g_new - g
        g = g_new
        sy = float(s @ y)
        alpha = float(s @ s) / sy if sy > 1e-300 else 1e12
        alpha = min(max(alpha, 1e-12), 1e12)
        if np.max(np.abs(x)) > 1e12:
            raise QpUnbounded("QP iterates diverged: objective unbounded below")
    if not converged:
        x, g = _polish(p, x, g)
    pgn = projected_gradient_norm(p, x)
    converged = converged or pgn <= tol
    return QpSolution(x, p.objective(x), it, converged, pgn)


def _polish(p: BoxQp, x, g, max_steps=None):
    """Primal active-set refinement started from ``x``.

    The working set holds variables fixed on a bound.  On the free face the
    step is Newton on the range of the Hessian block plus steepest descent
    on its null space (where the objective is linear); a blocking bound is
    added to the working set, and at a face optimum the bound with the most
    negative multiplier is released.  Every step keeps ``x`` feasible and
    never increases the objective.
    """
    M, q, lo, hi = p.M, p.q, p.lower, p.upper
    n = p.n
    max_steps = 4 * n + 10 if max_steps is None else max_steps
    eps_lo = 1e-10 * (1.0 + np.abs(np.where(np.isfinite(lo), lo, 0.0)))
    eps_hi = 1e-10 * (1.0 + np.abs(np.where(np.isfinite(hi), hi, 0.0)))
    on_lo = x <= lo + eps_lo
    on_hi = ~on_lo & (x >= hi - eps_hi)
    x = x.copy()
    x[on_lo] = lo[on_lo]
    x[on_hi] = hi[on_hi]
    g = M @ x - q
    for _ in range(max_steps):
        scale = 1.0 + float(np.max(np.abs(q))) + float(np.max(np.abs(M))) * float(np.max(np.abs(x)))
        free = ~(on_lo | on_hi)
        df = _face_direction(M[np.ix_(free, free)], g[free], 1e-13 * scale) if free.any() else None
        if df is None:
            mult = np.where(on_lo, g, np.where(on_hi, -g, 0.0))
            j = int(np.argmin(mult))
            if mult[j] >= -1e-12 * scale:
                break
            on_lo[j] = on_hi[j] = False
            continue
        idx = np.flatnonzero(free)
        xf = x[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(df > 0, (hi[idx] - xf) / df, np.where(df < 0, (lo[idx] - xf) / df, np.inf))
        ratios = np.maximum(ratios, 0.0)
        k = int(np.argmin(ratios))
        t_max = float(ratios[k])
        gd = float(g[idx] @ df)
        dMd = float(df @ M[np.ix_(idx, idx)] @ df)
        t = t_max if dMd <= 0 else min(t_max, -gd / dMd)
        if not np.isfinite(t):
            raise QpUnbounded("QP objective is unbounded below along a feasible ray")
        x[idx] = np.clip(xf + t * df, lo[idx], hi[idx])
        if t >= t_max:
            j = idx[k]
            if df[k] < 0:
                x[j], on_lo[j] = lo[j], True
            else:
                x[j], on_hi[j] = hi[j], True
        g = M @ x - q
    return x, g


def _face_direction(Mff, gf, tiny):
    """Descent direction on a face, or ``None`` if the face is optimal.

    If the gradient has a component in the null space of ``Mff`` the
    objective is linear along it and that component alone is returned (the
    caller then runs to the nearest bound); otherwise the Newton step.
    """
    if np.max(np.abs(gf)) <= tiny:
        return None
    w, V = np.linalg.eigh(Mff)
    live = w > 1e-12 * max(1.0, abs(w[-1]))
    c = V.T @ gf
    g_null = V[:, ~live] @ c[~live]
    if np.max(np.abs(g_null), initial=0.0) > tiny:
        df = -g_null
    else:
        df = -(V[:, live] @ (c[live] / w[live]))
    if not float(gf @ df) < 0:
        return None
    return df


# ---------------------------------------------------------------------------
# Symmetric / generalized eigenproblems
# ---------------------------------------------------------------------------

def _round_robin(n):
    """Pairings of a round-robin tournament: ``n - 1`` rounds of disjoint pairs.

    ``n`` must be even.  Every unordered pair appears in exactly one round.
    """
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        p = np.array(players[:half])
        r = np.array(players[half:][::-1])
        rounds.append((np.minimum(p, r), np.maximum(p, r)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(S, tol=1e-14, max_sweeps=100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Rotations are applied in parallel (round-robin) order: each round
    annihilates ``n/2`` disjoint off-diagonal pairs at once, and one sweep
    of ``n - 1`` rounds visits every pair.

    Returns ``(w, V)`` with eigenvalues ascending and orthonormal columns.
    """
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    if n == 1:
        return S.diagonal().copy(), np.eye(1)
    m = n + (n % 2)
    # pad odd sizes with a decoupled zero row/column
    A = np.zeros((m, m))
    A[:n, :n] = S
    V = np.eye(m)
    fro = np.linalg.norm(A)
    if fro == 0.0:
        return np.zeros(n), np.eye(n)
    rounds = _round_robin(m)
    mask = ~np.eye(m, dtype=bool)
    for _ in range(max_sweeps):
        # computed directly: |A|^2 - |diag A|^2 cancels catastrophically
        if np.linalg.norm(A[mask]) <= tol * fro:
            break
        for p, r in rounds:
            apr = A[p, r]
            live = np.abs(apr) > 1e-300
            if not np.any(live):
                continue
            p, r, apr = p[live], r[live], apr[live]
            tau = (A[r, r] - A[p, p]) / (2.0 * apr)
            big = np.abs(tau) > 1e150
            tau_s = np.where(big, 1.0, tau)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau_s) + np.sqrt(1.0 + tau_s * tau_s))
            t = np.where(big, 0.5 / np.where(big, tau, 1.0), t)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            J = np.eye(m)
            J[p, p] = c
            J[r, r] = c
            J[p, r] = s
            J[r, p] = -s
            A = J.T @ A @ J
            V = V @ J
    w = np.diag(A)[:n].copy()
    V = V[:n, :n] if n == m else _drop_pad(V, n)
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def _drop_pad(V, n):
    # the padded coordinate never mixes with the others, so one column of V
    # is the pad's unit vector; remove it
    pad = int(np.argmax(np.abs(V[n, :])))
    keep = [j for j in range(V.shape[1]) if j != pad]
    return V[:n, keep]


def min_gen_eigenpair(A, B, ridge=0.0):
    """Smallest eigenpair of ``(A + ridge I) v = lam (B + ridge I) v``.

    ``B + ridge I`` is Cholesky-factored, the pencil is reduced to a standard
    symmetric problem and diagonalized with :func:`jacobi_eigh`.  The
    returned eigenvector has unit Euclidean norm.
    """
    A = _as_finite(A, "A")
    B = _as_finite(B, "B")
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A and B must be square and of equal size")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    n = A.shape[0]
    eye = np.eye(n)
    Ar = 0.5 * (A + A.T) + ridge * eye
    Br = 0.5 * (B + B.T) + ridge * eye
    try:
        L = linalg.cholesky(Br, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise ValueError("B + ridge*I is not positive definite") from exc
    if np.any(np.diag(L) <= 0):
        raise ValueError("B + ridge*I is not positive definite")
    Y = linalg.solve_triangular(L, Ar, lower=True, check_finite=False)
    C = linalg.solve_triangular(L, Y.T, lower=True, check_finite=False)
    C = 0.5 * (C + C.T)
    w, U = jacobi_eigh(C)
    v = linalg.solve_triangular(L.T, U[:, 0], lower=False, check_finite=False)
    v = v / np.linalg.norm(v)
    # the Rayleigh quotient is the most accurate eigenvalue for the normalized v
    lam = float(v @ Ar @ v) / float(v @ Br @ v)
    return lam, v


# ---------------------------------------------------------------------------
# l1-regularized least squares
# ---------------------------------------------------------------------------

def power_iteration(S, max_iter=1000, tol=1e-12):
    """Largest eigenvalue of a symmetric PSD matrix."""
    n = S.shape[0]
    v = 1.0 + np.arange(n) / max(n, 1)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = S @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(nw - lam) <= tol * nw:
            lam = nw
            break
        lam = nw
    return float(lam)


def l1_objective(A, B, W, lam):
    R = A @ W - B
    return float(np.sum(R * R) + lam * np.sum(np.abs(W)))


def soft_threshold(Z, thr):
    return np.sign(Z) * np.maximum(np.abs(Z) - thr, 0.0)


def fista_l1(A, B, lam, max_iter=DEFAULT_MAX_ITER, tol=1e-10, full_output=False, warn=True):
    """Minimize ``||A W - B||_F^2 + lam * ||W||_1`` with monotone FISTA.

    The step is ``1/L`` with ``L`` the largest eigenvalue of ``A'A`` (found by
    power iteration) applied to the equivalent objective
    ``0.5||AW - B||^2 + (lam/2)||W||_1``, so the shrinkage threshold is
    ``lam / (2L)``.  Whenever a momentum step would raise the objective the
    momentum is reset, hence the accepted objective sequence is
    non-increasing.

    Returns ``W`` or, with ``full_output``, ``(W, info)`` where ``info`` holds
    ``objective``, ``history``, ``iterations``, ``converged`` and ``restarts``.
    A :class:`SolverWarning` is emitted on non-convergence unless ``warn``
    is False.
    """
    A = _as_finite(A, "A")
    B = _as_finite(B, "B")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    vector_rhs = B.ndim == 1
    if vector_rhs:
        B = B[:, None]
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, B is {B.shape}")

    AtA = A.T @ A
    AtB = A.T @ B
    # power iteration approaches L from below; a hair of slack keeps 1/L safe
    L = power_iteration(AtA) * (1.0 + 1e-6)
    W = np.zeros((A.shape[1], B.shape[1]))
    if L == 0.0:
        info = dict(objective=l1_objective(A, B, W, lam), history=[], iterations=0,
                    converged=True, restarts=0)
        W = W.ravel() if vector_rhs else W
        return (W, info) if full_output else W
    thr = 0.5 * lam / L
    Y = W.copy()
    t = 1.0
    f_w = l1_objective(A, B, W, lam)
    history = [f_w]
    restarts = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        Z = soft_threshold(Y - (AtA @ Y - AtB) / L, thr)
        f_z = l1_objective(A, B, Z, lam)
        if f_z > f_w:
            if Y is W:
                # plain proximal step from W failed to descend: round-off floor
                converged = True
                break
            Y, t = W, 1.0
            restarts += 1
            continue
        step = np.max(np.abs(Z - W))
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        Y = Z + ((t - 1.0) / t_next) * (Z - W)
        W, t, f_w = Z, t_next, f_z
        history.append(f_w)
        if step <= tol * (1.0 + np.max(np.abs(W))):
            converged = True
            break
    if not converged and warn:
        warnings.warn("FISTA reached max_iter before converging", SolverWarning, stacklevel=2)
    W = W.ravel() if vector_rhs else W
    if full_output:
        return W, dict(objective=f_w, history=history, iterations=it,
                       converged=converged, restarts=restarts)
    return W
