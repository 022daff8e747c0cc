"""Error measures between eigenvector approximations."""

import numpy as np

from .assembly import a_norm

__all__ = ["align_sign", "aligned_a_error", "subspace_a_gap", "clusters",
           "pair_errors", "loglog_slope", "rates"]


def align_sign(u, ref, b):
    """Return ``u`` or ``-u``, whichever has non-negative b-product with ``ref``."""
    return -u if float(u @ (b @ ref)) < 0 else u


def aligned_a_error(a, b, u, ref):
    """``||u - ref||_a`` after sign alignment through the b-inner product."""
    return a_norm(a, align_sign(u, ref, b) - ref)


def subspace_a_gap(a, u, ref):
    """Largest a-norm distance from a column of ``u`` to ``span(ref)``.

    For b-normalized columns this is the sine of the largest angle between a
    vector and the reference space, scaled by the vector's a-norm.
    """
    u = np.atleast_2d(u.T).T
    ref = np.atleast_2d(ref.T).T
    g = ref.T @ (a @ ref)
    coef = np.linalg.solve(g, ref.T @ (a @ u))
    return max(a_norm(a, u[:, j] - ref @ coef[:, j]) for j in range(u.shape[1]))


def clusters(values, rtol=0.05):
    """Group indices of sorted values whose consecutive relative gap is below ``rtol``."""
    groups = [[0]] if len(values) else []
    for i in range(1, len(values)):
        if abs(values[i] - values[i - 1]) <= rtol * abs(values[i]):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def pair_errors(a, b, u, ref, groups):
    """Per-pair a-norm differences; pairs in a cluster share the subspace gap."""
    err = np.empty(u.shape[1])
    for g in groups:
        if len(g) == 1:
            err[g[0]] = aligned_a_error(a, b, u[:, g[0]], ref[:, g[0]])
        else:
            err[g] = subspace_a_gap(a, u[:, g], ref[:, g])
    return err


def loglog_slope(h, err):
    """Least-squares slope of ``log(err)`` against ``log(h)``."""
    h, err = np.asarray(h, float), np.asarray(err, float)
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


def rates(err):
    """``log2(err_k / err_{k+1})`` for consecutive entries."""
    err = np.asarray(err, float)
    return np.log2(err[:-1] / err[1:])
