"""Dense symmetric-definite eigensolvers and the sparse direct baseline.

``solve_gevp`` reduces ``A v = lambda B v`` to standard form with a Cholesky
factor of ``B`` and diagonalizes it with cyclic Jacobi rotations.  The
rotations are applied in round-robin order, so each round consists of
``n/2`` disjoint rotations that are carried out together.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg  # noqa: F401  (makes sp.linalg available)
from scipy.linalg import lapack, solve_triangular

from .linalg import solve_cg

__all__ = [
    "EigenBasis",
    "CholeskyError",
    "ConvergenceError",
    "DimensionError",
    "cholesky",
    "jacobi_eigh",
    "solve_gevp",
    "solve_gevp_sparse_small",
    "direct_eigensolve",
    "b_orthonormalize",
    "fix_signs",
]

DENSE_BOUND = 5000


class CholeskyError(np.linalg.LinAlgError):
    """Mass matrix not positive definite; ``pivot`` is the 0-based failing index."""

    def __init__(self, pivot):
        super().__init__(f"Cholesky factorization failed at pivot {pivot}: "
                         "matrix is not positive definite")
        self.pivot = pivot


class ConvergenceError(RuntimeError):
    pass


class DimensionError(ValueError):
    pass


@dataclass
class EigenBasis:
    """Eigenvalues in ascending order with eigenvectors as columns."""

    values: np.ndarray
    vectors: np.ndarray
    b_orthonormal: bool = True
    iterations: int = 0

    def __len__(self):
        return self.values.shape[0]


def _check_symmetric(m, name, rtol=1e-13):
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    scale = np.abs(m).max() if m.size else 0.0
    if m.size and np.abs(m - m.T).max() > rtol * scale:
        raise ValueError(f"{name} is not symmetric")


def cholesky(b):
    """Lower Cholesky factor of ``b``; raises :class:`CholeskyError`."""
    lower, info = lapack.dpotrf(np.asarray(b, dtype=float), lower=1, clean=1)
    if info > 0:
        raise CholeskyError(info - 1)
    if info < 0:
        raise ValueError(f"illegal argument {-info} to dpotrf")
    return lower


def _round_robin(n):
    """Pairings for ``n - 1`` rounds covering every index pair once (n even)."""
    idx = np.arange(n)
    rounds = []
    for _ in range(n - 1):
        rounds.append((idx[: n // 2].copy(), idx[n // 2:][::-1].copy()))
        idx = np.concatenate([idx[:1], idx[-1:], idx[1:-1]])
    return rounds


def _off(a):
    off = a - np.diag(np.diag(a))
    return float(np.sqrt((off * off).sum()))


def jacobi_eigh(s, tol=1e-12, max_sweeps=30):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm is at most ``tol``
    times the Frobenius norm of ``s``.  Returns unsorted ``(values, vectors,
    sweeps)``.
    """
    s = np.array(s, dtype=float)
    n0 = s.shape[0]
    if n0 <= 1:
        return np.diag(s).copy(), np.eye(n0), 0
    n = n0 + (n0 % 2)
    a = np.zeros((n, n))
    a[:n0, :n0] = 0.5 * (s + s.T)
    v = np.eye(n)
    target = tol * np.linalg.norm(a)
    rounds = _round_robin(n)
    sweeps = 0
    while _off(a) > target:
        if sweeps == max_sweeps:
            raise ConvergenceError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
        for p, q in rounds:
            apq = a[p, q]
            active = apq != 0.0
            if not active.any():
                continue
            app, aqq = a[p, p], a[q, q]
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                theta = np.where(active, (aqq - app) / (2.0 * np.where(active, apq, 1.0)), 0.0)
                # for huge theta, t ~ 1/(2 theta); hypot avoids overflow of theta**2
                t = np.where(active, np.sign(theta) / (np.abs(theta) + np.hypot(1.0, theta)), 0.0)
            t[active & (theta == 0.0)] = 1.0
            c = 1.0 / np.sqrt(1.0 + t * t)
            sn = t * c
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * ap - sn * aq
            a[:, q] = sn * ap + c * aq
            ap, aq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * ap - sn[:, None] * aq
            a[q, :] = sn[:, None] * ap + c[:, None] * aq
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vp - sn * vq
            v[:, q] = sn * vp + c * vq
        sweeps += 1
    return np.diag(a)[:n0].copy(), v[:n0, :n0].copy(), sweeps


def fix_signs(vectors):
    """Flip columns so that each one's largest-magnitude entry is positive."""
    if vectors.size == 0:
        return vectors
    rows = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[rows, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def solve_gevp(a, b, bound=DENSE_BOUND, tol=1e-12):
    """Full spectrum of the dense symmetric-definite pencil ``(a, b)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_symmetric(a, "A")
    _check_symmetric(b, "B")
    if a.shape != b.shape:
        raise DimensionError(f"pencil dimensions differ: {a.shape} vs {b.shape}")
    if a.shape[0] > bound:
        raise DimensionError(f"dimension {a.shape[0]} exceeds dense bound {bound}")
    lower = cholesky(b)
    c = solve_triangular(lower, a, lower=True)
    c = solve_triangular(lower, c.T, lower=True)
    values, y, sweeps = jacobi_eigh(c, tol=tol)
    order = np.argsort(values, kind="stable")
    values = values[order]
    x = solve_triangular(lower, y[:, order], lower=True, trans="T")
    return EigenBasis(values, fix_signs(x), True, sweeps)


def solve_gevp_sparse_small(a, b, bound=DENSE_BOUND):
    """Densify a sparse pencil and solve it with :func:`solve_gevp`."""
    if a.shape[0] > bound:
        raise DimensionError(f"dimension {a.shape[0]} exceeds dense bound {bound}")
    dense = (lambda m: m.toarray() if sp.issparse(m) else np.asarray(m, dtype=float))
    return solve_gevp(dense(a), dense(b), bound=bound)


def b_orthonormalize(x, b, drop_tol=0.0, passes=2):
    """Modified Gram-Schmidt in the ``b`` inner product.

    Columns whose norm after orthogonalization falls below ``drop_tol``
    times their original norm are discarded.
    """
    cols = []
    for j in range(x.shape[1]):
        w = np.array(x[:, j], dtype=float)
        bw = b @ w
        n0 = np.sqrt(max(float(w @ bw), 0.0))
        if n0 == 0.0:
            continue
        for _ in range(passes):
            for u, bu in cols:
                w -= float(bu @ w) * u
        bw = b @ w
        nrm = np.sqrt(max(float(w @ bw), 0.0))
        if nrm <= drop_tol * n0 or nrm == 0.0:
            continue
        cols.append((w / nrm, bw / nrm))
    if not cols:
        return np.empty((x.shape[0], 0))
    return np.column_stack([u for u, _ in cols])


def direct_eigensolve(a, b, q, rel_tol=1e-10, max_outer=200, seed=42,
                      solve_tol=1e-12, guard=3, res_tol=1e-9):
    """The ``q`` smallest eigenpairs of a sparse SPD pencil.

    Shift-and-invert subspace iteration with zero shift: every inverse
    application is a CG solve to ``solve_tol``, followed by modified
    Gram-Schmidt and a Rayleigh-Ritz step on the block.  Iteration stops when
    the eigenvalues change by less than ``rel_tol`` relative and every pair
    has ``||A v - lam B v|| <= res_tol (||A||_F + |lam| ||B||_F) ||v||``.
    """
    n = a.shape[0]
    if q < 1:
        raise ValueError("q must be >= 1")
    if q > n:
        raise DimensionError(f"asked for {q} eigenpairs of a {n}-dimensional pencil")
    block = min(q + guard, n)
    rng = np.random.default_rng(seed)
    x = b_orthonormalize(rng.standard_normal((n, block)), b)
    theta = np.ones(block)
    prev = None
    norm_a, norm_b = _fro(a), _fro(b)
    for outer in range(1, max_outer + 1):
        y = np.empty_like(x)
        bx = b @ x
        for j in range(x.shape[1]):
            y[:, j], rep = solve_cg(a, bx[:, j], x[:, j] / theta[j], rel_tol=solve_tol)
        y = b_orthonormalize(y, b, drop_tol=1e-14)
        small = solve_gevp(_sym(y.T @ (a @ y)), _sym(y.T @ (b @ y)))
        x = y @ small.vectors
        theta = np.maximum(small.values, np.finfo(float).tiny)
        lam = small.values[:q]
        if prev is not None and np.all(np.abs(lam - prev) <= rel_tol * np.abs(lam)):
            v = x[:, :q]
            res = np.linalg.norm(a @ v - (b @ v) * lam, axis=0)
            bound = res_tol * (norm_a + np.abs(lam) * norm_b) * np.linalg.norm(v, axis=0)
            if np.all(res <= bound):
                return EigenBasis(lam.copy(), fix_signs(v), True, outer)
        prev = lam.copy()
    raise ConvergenceError(f"subspace iteration did not converge in {max_outer} iterations")


def _fro(m):
    return float(sp.linalg.norm(m)) if sp.issparse(m) else float(np.linalg.norm(m))


def _sym(m):
    return 0.5 * (m + m.T)
