import math
from dataclasses import replace

import numpy as np
import pytest
import scipy.linalg as sla

from cascadic_eig.assembly import example2, laplace
from cascadic_eig.cascadic import (ConfigError, EigenState, SolverConfig, auxiliary_solve,
                                   cascadic_solve, correction_pencil, discretize, schedule,
                                   smooth_correction, smoothing_work, truncate)
from cascadic_eig.dense_eig import direct_eigensolve, solve_gevp
from cascadic_eig.linalg import smooth
from cascadic_eig.mesh import build_hierarchy, structured_unit_square
from cascadic_eig.metrics import aligned_a_error

TWO_PI2 = 2 * np.pi ** 2


@pytest.fixture(scope="module")
def small_disc():
    return discretize(build_hierarchy(structured_unit_square(4), 4), example2)


def test_schedule_examples():
    cfg = SolverConfig(levels=5)
    assert schedule(5, cfg) == 2
    assert 2 * 2 ** 2.02 == pytest.approx(8.112, abs=1e-3)
    assert schedule(3, cfg) == 9
    ms = [schedule(k, cfg) for k in range(2, 6)]
    assert ms == sorted(ms, reverse=True)
    with pytest.raises(ValueError):
        schedule(6, cfg)


@pytest.mark.parametrize("n", range(2, 9))
@pytest.mark.parametrize("sigma, zeta", [(2.0, 1.01), (3.0, 1.5), (2.0, 1.99)])
def test_schedule_bracket(n, sigma, zeta):
    """(h_k/h_n)^zeta <= m_k/m_n <= sigma (h_k/h_n)^zeta with h_k/h_n = 2^(n-k)."""
    cfg = SolverConfig(levels=n, sigma=sigma, zeta=zeta)
    mn = schedule(n, cfg)
    for k in range(2, n + 1):
        ratio = 2.0 ** (zeta * (n - k))
        assert ratio <= schedule(k, cfg) / mn <= sigma * ratio


def test_schedule_mbar_scales():
    assert schedule(4, SolverConfig(levels=4, mbar=4)) == 4
    assert schedule(2, SolverConfig(levels=4, mbar=4)) == math.ceil(4 * 2 ** 2.02)


@pytest.mark.parametrize("kw", [dict(levels=0), dict(nev=0), dict(sigma=1.0), dict(zeta=1.0),
                                dict(mbar=0.5), dict(coarse_space_level=3, levels=2),
                                dict(omega=0.0), dict(tau=-1.0), dict(smoother="sor")])
def test_config_validation(kw):
    with pytest.raises((ConfigError, ValueError)):
        SolverConfig(**kw)


def test_single_level_is_coarse_solve(small_disc):
    disc = truncate(small_disc, 1)
    states = cascadic_solve(disc, SolverConfig(levels=1, nev=3))
    assert len(states) == 1
    lev = disc[1]
    ref = sla.eigh(lev.a.toarray(), lev.b.toarray(), eigvals_only=True)[:3]
    np.testing.assert_allclose(states[0].values, ref, rtol=1e-12)
    assert states[0].work == 0


def test_level_mismatch_rejected(small_disc):
    with pytest.raises(ConfigError):
        cascadic_solve(small_disc, SolverConfig(levels=3))


def test_too_many_eigenpairs(small_disc):
    with pytest.raises(ConfigError):
        cascadic_solve(small_disc, SolverConfig(levels=4, nev=10))


@pytest.mark.parametrize("nev", [1, 3])
def test_normalization_and_upper_bound(small_disc, nev):
    cfg = SolverConfig(levels=4, nev=nev)
    for st in cascadic_solve(small_disc, cfg):
        lev = small_disc[st.level]
        gram = st.vectors.T @ (lev.b @ st.vectors)
        np.testing.assert_allclose(np.diag(gram), 1.0, atol=1e-10)
        exact = sla.eigh(lev.a.toarray(), lev.b.toarray(), eigvals_only=True)[:nev]
        assert np.all(st.values >= exact - 1e-9 * exact)


def test_work_is_cumulative(small_disc):
    cfg = SolverConfig(levels=4, nev=2)
    states = cascadic_solve(small_disc, cfg)
    works = [s.work for s in states]
    assert works == sorted(works)
    recount = sum(r.iterations * small_disc[s.level].nnz for s in states[1:] for r in s.reports)
    assert states[-1].work == recount
    assert recount == 2 * smoothing_work(small_disc, cfg)


def test_one_step_tracks_direct(laplace_disc):
    disc = truncate(laplace_disc, 2)
    states = cascadic_solve(disc, SolverConfig(levels=2))
    lam_dir = direct_eigensolve(disc[2].a, disc[2].b, 1).values[0]
    assert abs(states[1].values[0] - lam_dir) <= 0.1 * abs(lam_dir - TWO_PI2)


def test_zero_smoothing_steps_valid(small_disc):
    cfg = SolverConfig(levels=1, nev=2)
    st = cascadic_solve(truncate(small_disc, 1), cfg)[0]
    lev = small_disc[2]
    u0 = lev.prolong @ st.vectors
    rhs = (lev.b @ u0) * st.values
    smoothed = np.column_stack([smooth(lev.a, rhs[:, j], u0[:, j], 0)[0] for j in range(2)])
    a_small, b_small, x = correction_pencil(lev, smoothed)
    # with m = 0 the extras are prolongated coarse vectors and add no direction
    assert x.shape[1] == 0
    basis = solve_gevp(a_small, b_small)
    v = lev.from_coarse @ basis.vectors[:, :2]
    np.testing.assert_allclose(np.diag(v.T @ (lev.b @ v)), 1.0, atol=1e-10)
    exact = sla.eigh(lev.a.toarray(), lev.b.toarray(), eigvals_only=True)[:2]
    assert np.all(basis.values[:2] >= exact)


def test_exact_solves_match_auxiliary(small_disc):
    cfg = SolverConfig(levels=4, nev=2, exact_solves=True, verify=True)
    states = cascadic_solve(small_disc, cfg)
    aux = auxiliary_solve(small_disc, cfg, states)
    for st, ax in zip(states, aux):
        np.testing.assert_allclose(st.values, ax.values, rtol=1e-9)


def test_auxiliary_first_level_identical(small_disc):
    cfg = SolverConfig(levels=4, verify=True)
    states = cascadic_solve(small_disc, cfg)
    aux = auxiliary_solve(small_disc, cfg, states)
    assert aux[0].values.tobytes() == states[0].values.tobytes()
    assert aux[0].vectors.tobytes() == states[0].vectors.tobytes()
    # the auxiliary space contains the cascadic one
    for st, ax in zip(states[1:], aux[1:]):
        assert np.all(ax.values <= st.values * (1 + 1e-12))


def test_auxiliary_needs_verify(small_disc):
    cfg = SolverConfig(levels=4)
    with pytest.raises(ConfigError):
        auxiliary_solve(small_disc, cfg, cascadic_solve(small_disc, cfg))


def test_sign_flip_independence(small_disc):
    cfg = SolverConfig(levels=4, nev=3)
    st = cascadic_solve(truncate(small_disc, 1), replace(cfg, levels=1))[0]
    flipped = EigenState(st.level, st.values.copy(), st.vectors * np.array([-1.0, 1.0, -1.0]))
    a = smooth_correction(st, small_disc, cfg)
    b = smooth_correction(flipped, small_disc, cfg)
    np.testing.assert_allclose(b.values, a.values, rtol=1e-12)
    lev = small_disc[2]
    ref = direct_eigensolve(lev.a, lev.b, 1).vectors[:, 0]
    assert aligned_a_error(lev.a, lev.b, a.vectors[:, 0], ref) == pytest.approx(
        aligned_a_error(lev.a, lev.b, b.vectors[:, 0], ref), rel=1e-10)


@pytest.mark.parametrize("smoother", ["cg", "gs", "jacobi", "richardson"])
def test_all_smoothers_converge(laplace_disc, smoother):
    disc = truncate(laplace_disc, 4)
    lam = cascadic_solve(disc, SolverConfig(levels=4, smoother=smoother))[-1].values[0]
    lam_dir = direct_eigensolve(disc[4].a, disc[4].b, 1).values[0]
    assert lam >= lam_dir * (1 - 1e-12)
    assert lam - lam_dir <= 0.5 * (lam_dir - TWO_PI2)


def test_laplace_eigenvalue_rates(laplace_disc):
    states = cascadic_solve(truncate(laplace_disc, 5), SolverConfig(levels=5))
    err = np.array([s.values[0] - TWO_PI2 for s in states])
    assert np.all(err > 0)
    ratios = err[2:-1] / err[3:]
    assert np.all((ratios >= 3.3) & (ratios <= 4.7))


def test_coarse_space_level_two():
    disc = discretize(build_hierarchy(structured_unit_square(4), 4), laplace,
                      coarse_space_level=2)
    states = cascadic_solve(disc, SolverConfig(levels=4, coarse_space_level=2))
    assert [s.level for s in states] == [2, 3, 4]
    assert states[0].correction_dim == disc[2].n_dofs
    assert states[-1].correction_dim == disc[2].n_dofs + 1


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_work_bound(laplace_disc, n):
    cfg = SolverConfig(levels=n)
    assert smoothing_work(truncate(laplace_disc, n), cfg) <= 8 * cfg.mbar * laplace_disc[n].nnz
