"""Sparse symmetric kernels, smoothers and a conjugate-gradient solver."""

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular

__all__ = [
    "SmootherKind",
    "SmoothReport",
    "SmootherBreakdown",
    "apply",
    "dot",
    "axpy",
    "smooth",
    "solve_cg",
    "estimate_lambda_max",
]


class SmootherKind(enum.Enum):
    """Available smoothers with the exponent of their smoothing property."""

    CG = "cg"
    GAUSS_SEIDEL = "gs"
    JACOBI = "jacobi"
    RICHARDSON = "richardson"

    @property
    def alpha(self):
        return 1.0 if self is SmootherKind.CG else 0.5

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"conjugate_gradient": "cg", "gauss_seidel_symmetric": "gs",
                   "jacobi_damped": "jacobi"}
        return cls(aliases.get(value, value))


@dataclass
class SmoothReport:
    iterations: int
    initial_residual: float
    final_residual: float
    matvecs: int
    converged: bool = True


class SmootherBreakdown(ArithmeticError):
    """CG hit a direction of non-positive curvature; ``x`` is the last iterate."""

    def __init__(self, msg, x, iterations):
        super().__init__(msg)
        self.x = x
        self.iterations = iterations


def _check(a, *vecs):
    n = a.shape[0]
    if a.shape[1] != n:
        raise ValueError(f"matrix must be square, got {a.shape}")
    for v in vecs:
        if v.shape != (n,):
            raise ValueError(f"dimension mismatch: matrix {a.shape}, vector {v.shape}")


def apply(a, x):
    x = np.asarray(x, dtype=float)
    _check(a, x)
    return a @ x


def dot(x, y):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(x @ y)


def axpy(alpha, x, y):
    """Return ``alpha * x + y``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return alpha * x + y


def _cg(a, f, x, max_iter, stop):
    """Plain CG from ``x``; ``stop(rnorm)`` ends the loop early when true."""
    r = f - a @ x
    matvecs = 1
    rr = float(r @ r)
    r0 = np.sqrt(rr)
    p = r.copy()
    it = 0
    while it < max_iter:
        if stop(np.sqrt(rr)):
            break
        if rr == 0.0:
            # exact solution reached; remaining steps are no-ops
            it = max_iter
            break
        ap = a @ p
        matvecs += 1
        pap = float(p @ ap)
        if not pap > 0.0:
            raise SmootherBreakdown(f"CG breakdown at step {it + 1}: p^T A p = {pap:g}",
                                    x, it)
        step = rr / pap
        x = x + step * p
        r = r - step * ap
        rr_new = float(r @ r)
        p = r + (rr_new / rr) * p
        rr = rr_new
        it += 1
    return x, SmoothReport(it, r0, np.sqrt(rr), matvecs)


def estimate_lambda_max(a, steps=10, seed=0):
    """Rayleigh quotient after a few power iterations."""
    v = np.random.default_rng(seed).standard_normal(a.shape[0])
    for _ in range(steps):
        v = a @ v
        v /= np.linalg.norm(v)
    return float(v @ (a @ v))


def smooth(a, f, x0, m, kind=SmootherKind.CG, omega=0.5, tau=None):
    """Exactly ``m`` steps of a smoother for ``A x = f`` starting at ``x0``.

    CG restarts from ``x0`` on every call.  ``omega`` is the damped-Jacobi
    weight; ``tau`` the Richardson step, by default the reciprocal of a
    ten-step power estimate of the largest eigenvalue.
    """
    kind = SmootherKind.parse(kind)
    f = np.asarray(f, dtype=float)
    x = np.array(x0, dtype=float)
    _check(a, f, x)
    if m < 0:
        raise ValueError("number of smoothing steps must be >= 0")
    if kind is SmootherKind.CG:
        return _cg(a, f, x, m, lambda rnorm: False)

    r0 = float(np.linalg.norm(f - a @ x))
    matvecs = 1
    if m == 0:
        return x, SmoothReport(0, r0, r0, matvecs)
    if kind is SmootherKind.JACOBI:
        if not 0.0 < omega <= 1.0:
            raise ValueError("Jacobi damping must lie in (0, 1]")
        dinv = omega / a.diagonal()
        for _ in range(m):
            x = x + dinv * (f - a @ x)
        matvecs += m
    elif kind is SmootherKind.RICHARDSON:
        if tau is None:
            tau = 1.0 / estimate_lambda_max(a)
            matvecs += 11
        if not tau > 0.0:
            raise ValueError("Richardson step must be positive")
        for _ in range(m):
            x = x + tau * (f - a @ x)
        matvecs += m
    else:
        a = sp.csr_matrix(a)
        lower = sp.tril(a, format="csr")
        upper = sp.triu(a, format="csr")
        strict_lower = sp.tril(a, k=-1, format="csr")
        strict_upper = sp.triu(a, k=1, format="csr")
        for _ in range(m):
            x = spsolve_triangular(lower, f - strict_upper @ x, lower=True)
            x = spsolve_triangular(upper, f - strict_lower @ x, lower=False)
        matvecs += m
    r = float(np.linalg.norm(f - a @ x))
    return x, SmoothReport(m, r0, r, matvecs)


def solve_cg(a, f, x0=None, rel_tol=1e-12, max_iter=None):
    """CG until ``||f - A x|| <= rel_tol * ||f||`` or ``max_iter`` steps.

    Non-convergence is reported through ``report.converged`` and is not an
    error.
    """
    f = np.asarray(f, dtype=float)
    x = np.zeros_like(f) if x0 is None else np.array(x0, dtype=float)
    _check(a, f, x)
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    if max_iter is None:
        max_iter = 10 * f.shape[0] + 100
    target = rel_tol * float(np.linalg.norm(f))
    x, rep = _cg(a, f, x, max_iter, lambda rnorm: rnorm <= target)
    rep.converged = rep.final_residual <= target
    return x, rep
