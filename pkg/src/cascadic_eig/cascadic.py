"""Cascadic multigrid for symmetric elliptic eigenvalue problems.

The fine levels are never solved exactly.  On each level the previous
eigenvector approximation is prolongated, a fixed number of smoothing steps
is applied to the source problem ``A u = lambda B u_prev``, and a small
Rayleigh-Ritz problem on the coarse space enlarged by the smoothed vectors
produces the new eigenpair approximation.

Levels are numbered from 1 (coarsest) to ``n`` (finest) throughout.
"""

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from . import assembly
from .dense_eig import (DENSE_BOUND, b_orthonormalize, direct_eigensolve,
                        solve_gevp, solve_gevp_sparse_small)
from .linalg import SmootherKind, smooth, solve_cg
from .mesh import mesh_size
from .metrics import clusters, loglog_slope, pair_errors

__all__ = [
    "ConfigError",
    "SolverConfig",
    "Level",
    "Discretization",
    "EigenState",
    "AuxiliaryState",
    "discretize",
    "schedule",
    "coarse_solve",
    "correction_pencil",
    "smooth_correction",
    "cascadic_solve",
    "auxiliary_correction",
    "auxiliary_solve",
    "smoothing_work",
    "truncate",
    "verify_theorems",
]

BETA = 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the cascadic eigensolver.

    ``mbar`` scales the whole smoothing schedule; with the default ``mbar=2``
    the schedule is ``ceil(sigma * 2**(zeta*(n-k)))``.  ``coarse_space_level``
    names the level providing the correction space ``V_H``;
    ``first_level`` (default: the same level) is where the eigenproblem is
    solved directly.  ``exact_solves`` replaces smoothing by a CG solve to
    1e-12, the limit of infinitely many smoothing steps.
    """

    levels: int = 5
    nev: int = 1
    smoother: SmootherKind = SmootherKind.CG
    sigma: float = 2.0
    zeta: float = 1.01
    mbar: float = 2.0
    coarse_space_level: int = 1
    first_level: int = None
    dense_bound: int = DENSE_BOUND
    verify: bool = False
    exact_solves: bool = False
    omega: float = 0.5
    tau: float = None
    drop_tol: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "smoother", SmootherKind.parse(self.smoother))
        if self.first_level is None:
            object.__setattr__(self, "first_level", self.coarse_space_level)
        if self.levels < 1:
            raise ConfigError("levels must be >= 1")
        if self.nev < 1:
            raise ConfigError("nev must be >= 1")
        if not self.sigma > 1:
            raise ConfigError("sigma must be > 1")
        if not self.zeta > 1:
            raise ConfigError("zeta must be > 1")
        if not self.mbar >= 1:
            raise ConfigError("mbar must be >= 1")
        if not 1 <= self.coarse_space_level <= self.first_level <= self.levels:
            raise ConfigError("need 1 <= coarse_space_level <= first_level <= levels")
        if not 0 < self.omega <= 1:
            raise ConfigError("omega must lie in (0, 1]")
        if self.tau is not None and not self.tau > 0:
            raise ConfigError("tau must be positive")


@dataclass(eq=False)
class Level:
    """Matrices and transfer operators of one level."""

    k: int
    mesh: object
    dofs: object
    a: object
    b: object
    h: float
    prolong: object = None      # from level k-1
    from_coarse: object = None  # from the coarse space V_H
    a_hh: np.ndarray = None     # Galerkin restriction of a to V_H
    b_hh: np.ndarray = None
    b_hh_chol: np.ndarray = None

    @property
    def n_dofs(self):
        return self.dofs.n_dofs

    @property
    def nnz(self):
        return self.a.nnz


@dataclass(eq=False)
class Discretization:
    levels: list
    coefficients: object
    coarse_space_level: int = 1

    def __getitem__(self, k):
        return self.levels[k - 1]

    @property
    def n_levels(self):
        return len(self.levels)


def discretize(hierarchy, coefficients, coarse_space_level=None):
    """Assemble stiffness, mass and prolongation matrices on every level.

    The coarse-space blocks ``P^T A_k P`` are formed with the composed
    prolongation, so the correction problem is a true Rayleigh-Ritz problem
    within level ``k`` even when the quadrature is not exact.
    """
    c = hierarchy.coarse_space_level if coarse_space_level is None else coarse_space_level
    levels = []
    for k, t in enumerate(hierarchy.levels, start=1):
        dofs = assembly.dof_map(t)
        lev = Level(k, t, dofs, assembly.assemble_stiffness(t, dofs, coefficients),
                    assembly.assemble_mass(t, dofs, coefficients), mesh_size(t))
        if k > 1:
            lev.prolong = assembly.build_prolongation(hierarchy.maps[k - 2],
                                                      levels[-1].dofs, dofs)
        if k > c:
            prev = levels[-1].from_coarse
            lev.from_coarse = lev.prolong if prev is None else (lev.prolong @ prev).tocsr()
            p = lev.from_coarse
            lev.a_hh = _sym((p.T @ (lev.a @ p)).toarray())
            lev.b_hh = _sym((p.T @ (lev.b @ p)).toarray())
            lev.b_hh_chol = sla.cholesky(lev.b_hh, lower=True)
        levels.append(lev)
    return Discretization(levels, coefficients, c)


def _sym(m):
    return 0.5 * (m + m.T)


@dataclass(eq=False)
class EigenState:
    """Eigenpair approximations on one level.

    ``work`` is cumulative smoothing work in units of one stiffness matvec
    (one unit costs ``nnz`` of that level's matrix).  ``smoothed`` holds the
    smoothed vectors that spanned the correction space, kept in verification
    mode.
    """

    level: int
    values: np.ndarray
    vectors: np.ndarray
    work: int = 0
    steps: int = 0
    reports: list = field(default_factory=list)
    correction_dim: int = 0
    smoothed: np.ndarray = None
    seconds: dict = field(default_factory=dict)


@dataclass(eq=False)
class AuxiliaryState(EigenState):
    """Eigenpairs of the auxiliary method; ``exact`` holds the exactly solved source vectors."""

    exact: np.ndarray = None


def schedule(k, cfg):
    """Smoothing steps on level ``k``: ``ceil(sigma * mbar/2 * 2**(zeta*(n-k)))``."""
    n = cfg.levels
    if not 1 <= k <= n:
        raise ValueError(f"level {k} outside 1..{n}")
    return math.ceil(cfg.sigma * (cfg.mbar / 2.0) * BETA ** (cfg.zeta * (n - k)))


def _normalize(vectors, b):
    norms = np.sqrt(np.einsum("ij,ij->j", vectors, b @ vectors))
    return vectors / norms


def coarse_solve(disc, cfg):
    """Direct solve on the first level, returning the ``nev`` smallest pairs."""
    lev = disc[cfg.first_level]
    if lev.n_dofs < cfg.nev:
        raise ConfigError(f"level {lev.k} has {lev.n_dofs} interior DOFs, "
                          f"fewer than nev={cfg.nev}")
    t0 = time.perf_counter()
    basis = solve_gevp_sparse_small(lev.a, lev.b, bound=cfg.dense_bound)
    vecs = _normalize(basis.vectors[:, :cfg.nev], lev.b)
    return EigenState(lev.k, basis.values[:cfg.nev].copy(), vecs,
                      correction_dim=lev.n_dofs,
                      seconds={"coarse": time.perf_counter() - t0})


def correction_pencil(lev, extras, drop_tol=1e-10):
    """Rayleigh-Ritz pencil on ``V_H + span(extras)`` within level ``lev``.

    The extra vectors are first made b-orthogonal to the coarse space and to
    each other; vectors whose remaining b-norm falls below ``drop_tol``
    relative to their original norm carry no new direction and are dropped.
    Returns ``(A_small, B_small, basis_extras)``; the basis of the pencil is
    the coarse space followed by the columns of ``basis_extras``.
    """
    p = lev.from_coarse
    x = np.array(extras, dtype=float)
    b0 = np.sqrt(np.einsum("ij,ij->j", x, lev.b @ x))
    for _ in range(2):
        rhs = p.T @ (lev.b @ x)
        coef = sla.cho_solve((lev.b_hh_chol, True), rhs)
        x = x - p @ coef
    bx = np.sqrt(np.einsum("ij,ij->j", x, lev.b @ x))
    x = x[:, bx > drop_tol * b0]
    x = b_orthonormalize(x, lev.b, drop_tol=drop_tol)
    ax = lev.a @ x
    bxm = lev.b @ x
    a_small = np.block([[lev.a_hh, p.T @ ax], [ax.T @ p, x.T @ ax]])
    b_small = np.block([[lev.b_hh, p.T @ bxm], [bxm.T @ p, x.T @ bxm]])
    return _sym(a_small), _sym(b_small), x


def _ritz(lev, extras, nev, dense_bound, drop_tol):
    a_small, b_small, x = correction_pencil(lev, extras, drop_tol)
    basis = solve_gevp(a_small, b_small, bound=dense_bound)
    nh = lev.a_hh.shape[0]
    y = basis.vectors[:, :nev]
    vecs = lev.from_coarse @ y[:nh] + x @ y[nh:]
    return basis.values[:nev].copy(), _normalize(vecs, lev.b), a_small.shape[0]


def smooth_correction(state, disc, cfg):
    """One cascadic correction step from level ``k`` to ``k + 1``.

    Each tracked vector ``u_j`` is prolongated, used as initial guess for
    ``m_{k+1}`` smoothing steps on ``A x = lambda_j B (P u_j)``, and the
    smoothed vectors enlarge the coarse space for a small eigenproblem.
    """
    k = state.level
    if k >= disc.n_levels:
        raise ValueError("already on the finest level")
    lev = disc[k + 1]
    m = schedule(k + 1, cfg)
    t0 = time.perf_counter()
    u0 = lev.prolong @ state.vectors
    rhs = (lev.b @ u0) * state.values
    smoothed = np.empty_like(u0)
    reports = []
    for j in range(u0.shape[1]):
        if cfg.exact_solves:
            smoothed[:, j], rep = solve_cg(lev.a, rhs[:, j], u0[:, j], rel_tol=1e-12)
        else:
            smoothed[:, j], rep = smooth(lev.a, rhs[:, j], u0[:, j], m, cfg.smoother,
                                         omega=cfg.omega, tau=cfg.tau)
        reports.append(rep)
    t1 = time.perf_counter()
    values, vectors, dim = _ritz(lev, smoothed, cfg.nev, cfg.dense_bound, cfg.drop_tol)
    t2 = time.perf_counter()
    steps = sum(r.iterations for r in reports)
    return EigenState(k + 1, values, vectors,
                      work=state.work + steps * lev.nnz, steps=steps,
                      reports=reports, correction_dim=dim,
                      smoothed=smoothed if cfg.verify else None,
                      seconds={"smoothing": t1 - t0, "correction": t2 - t1})


def cascadic_solve(disc, cfg):
    """Coarse solve followed by one smoothing correction per finer level.

    Returns the states of levels ``first_level .. n``.
    """
    if disc.n_levels != cfg.levels:
        raise ConfigError(f"discretization has {disc.n_levels} levels, "
                          f"configuration asks for {cfg.levels}")
    if disc.coarse_space_level != cfg.coarse_space_level:
        raise ConfigError("discretization and configuration disagree on the coarse space")
    states = [coarse_solve(disc, cfg)]
    for _ in range(cfg.first_level, cfg.levels):
        states.append(smooth_correction(states[-1], disc, cfg))
    return states


def auxiliary_correction(state, smoothed, disc, cfg):
    """Auxiliary correction: exact source solve, then Ritz on ``V_H + span(u_hat, smoothed)``."""
    k = state.level
    lev = disc[k + 1]
    u0 = lev.prolong @ state.vectors
    rhs = (lev.b @ u0) * state.values
    exact = np.empty_like(u0)
    for j in range(u0.shape[1]):
        exact[:, j], _ = solve_cg(lev.a, rhs[:, j], u0[:, j], rel_tol=1e-12)
    extras = np.hstack([exact, smoothed])
    values, vectors, dim = _ritz(lev, extras, cfg.nev, cfg.dense_bound, cfg.drop_tol)
    return AuxiliaryState(k + 1, values, vectors, correction_dim=dim, exact=exact)


def auxiliary_solve(disc, cfg, states):
    """Auxiliary multilevel correction run alongside a verification-mode cascadic run."""
    first = states[0]
    aux = [AuxiliaryState(first.level, first.values.copy(), first.vectors.copy(),
                          correction_dim=first.correction_dim)]
    for st in states[1:]:
        if st.smoothed is None:
            raise ConfigError("cascadic states carry no smoothed vectors; "
                              "run with verify=True")
        aux.append(auxiliary_correction(aux[-1], st.smoothed, disc, cfg))
    return aux


def smoothing_work(disc, cfg):
    """Scheduled work ``sum_k m_k nnz(A_k)`` over the correction levels, per vector."""
    return sum(schedule(k, cfg) * disc[k].nnz
               for k in range(cfg.first_level + 1, cfg.levels + 1))


def truncate(disc, n):
    """The first ``n`` levels of ``disc`` (shares the level objects)."""
    return Discretization(disc.levels[:n], disc.coefficients, disc.coarse_space_level)


def verify_theorems(disc, cfg, seed=42, baseline=None):
    """Compare cascadic, auxiliary and direct eigenpairs.

    The error bounds of the method concern the finest level of a run whose
    schedule was built for that many levels, so every level ``k`` is taken
    as the final level of its own run with ``levels=k``.  Returns a dict with
    a per-level ``table`` (list of dicts), a ``checks`` mapping of named
    ``(passed, measured)`` results, the ``states``/``auxiliary`` lists of the
    full-depth run, and the direct ``baseline`` per level.
    """
    cfg = replace(cfg, verify=True)
    if baseline is None:
        baseline = [direct_eigensolve(disc[k].a, disc[k].b, cfg.nev, seed=seed)
                    for k in range(cfg.first_level, cfg.levels + 1)]
    table = []
    for n in range(cfg.first_level, cfg.levels + 1):
        run_cfg = replace(cfg, levels=n)
        states = cascadic_solve(truncate(disc, n), run_cfg)
        aux = auxiliary_solve(disc, run_cfg, states)
        st, ax, dr = states[-1], aux[-1], baseline[n - cfg.first_level]
        lev = disc[n]
        groups = clusters(dr.values)
        table.append({
            "level": n,
            "h": lev.h,
            "N": lev.n_dofs,
            "m": schedule(n, run_cfg) if n > cfg.first_level else 0,
            "work": st.work,
            "lam": st.values,
            "lam_aux": ax.values,
            "lam_dir": dr.values,
            "u_minus_aux": pair_errors(lev.a, lev.b, st.vectors, ax.vectors, groups),
            "u_minus_dir": pair_errors(lev.a, lev.b, st.vectors, dr.vectors, groups),
            "aux_minus_dir": pair_errors(lev.a, lev.b, ax.vectors, dr.vectors, groups),
        })
    return {"table": table, "checks": _theorem_checks(table), "states": states,
            "auxiliary": aux, "baseline": baseline}


def _theorem_checks(table):
    checks = {}
    last = table[-3:]
    if len(last) >= 2:
        ratio = np.array([r["u_minus_aux"][0] / r["h"] for r in last])
        spread = float(ratio.max() / ratio.min()) if (ratio > 0).all() else float("inf")
        checks["final_error_over_h_bounded"] = (spread <= 3.0, spread)
        slope = loglog_slope([r["h"] for r in last], [r["u_minus_dir"][0] for r in last])
        checks["cascadic_vs_direct_slope"] = (slope >= 0.9, slope)
    rows = table[1:]
    if len(rows) >= 2:
        slope = loglog_slope([r["h"] for r in rows], [r["aux_minus_dir"][0] for r in rows])
        checks["superapproximation_slope"] = (slope >= 1.7, slope)
    worst = max(abs(r["lam_dir"][0] - r["lam_aux"][0])
                / (1.1 * r["aux_minus_dir"][0] ** 2 + 1e-12 * r["lam_dir"][0]) for r in table)
    checks["auxiliary_eigenvalue_bound"] = (worst <= 1.0, worst)
    worst = max(abs(r["lam"][0] - r["lam_aux"][0])
                / (1.1 * r["u_minus_aux"][0] ** 2 + 1e-12 * r["lam"][0]) for r in table)
    checks["cascadic_eigenvalue_bound"] = (worst <= 1.0, worst)
    return {k: (bool(ok), None if v is None else float(v)) for k, (ok, v) in checks.items()}
