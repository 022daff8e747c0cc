import io

import numpy as np
import pytest

from cascadic_eig.cascadic import SolverConfig, smoothing_work
from cascadic_eig.cli import main
from cascadic_eig.harness import (ExperimentSpec, LevelRecord, StudyError, convergence_rates,
                                  csv_text, emit_plotdata, laplace_eigenvalues, read_csv,
                                  reference_eigenvalues, richardson, run_study, write_csv)
from cascadic_eig.mesh import save_mesh, structured_unit_square

PI2 = np.pi ** 2


def spec(**kw):
    cfg = kw.pop("config", SolverConfig(levels=kw.pop("levels", 3), nev=kw.pop("nev", 1)))
    return ExperimentSpec(config=cfg, **kw)


@pytest.fixture(scope="module")
def baseline_run():
    s = spec(levels=4, nev=2, baseline=True, verify=True, coarse_cells=4)
    return s, run_study(s)


def test_laplace_references():
    assert laplace_eigenvalues(1)[0] == pytest.approx(19.7392088022, rel=1e-10)
    np.testing.assert_allclose(laplace_eigenvalues(4), PI2 * np.array([2, 5, 5, 8]), rtol=1e-15)
    np.testing.assert_allclose(laplace_eigenvalues(6), PI2 * np.array([2, 5, 5, 8, 10, 10]),
                               rtol=1e-15)
    np.testing.assert_allclose(reference_eigenvalues(spec(nev=4)), laplace_eigenvalues(4))


def test_richardson():
    assert richardson(20.0, 19.80) == pytest.approx(19.7333333333, rel=1e-10)
    s = spec(problem="example2")
    with pytest.raises(ValueError):
        reference_eigenvalues(s)
    np.testing.assert_allclose(reference_eigenvalues(s, [[20.0], [19.8]]), [59.2 / 3])


def _record(level, errs):
    return LevelRecord(level, 0.1, 1, 1, 1, np.ones(len(errs)), np.array(errs, float))


def test_rates_example():
    recs = [_record(1, [16.0]), _record(2, [4.0]), _record(3, [1.0])]
    rates, summary, notes = convergence_rates(recs)
    np.testing.assert_allclose(rates, [[2.0, 2.0]])
    assert summary == [(2.0, 2.0)] and notes == []


def test_rates_exclude_nonpositive():
    recs = [_record(1, [16.0, 1.0]), _record(2, [0.0, 0.5]), _record(3, [1.0, 0.25])]
    rates, _, notes = convergence_rates(recs)
    assert np.isnan(rates[0]).all()
    np.testing.assert_allclose(rates[1], [1.0, 1.0])
    assert len(notes) == 1 and "level 2" in notes[0]


def test_study_laplace_four_levels(tmp_path):
    out = tmp_path / "run.csv"
    recs = run_study(spec(levels=4, out=str(out)))
    assert len(recs) == 4
    lam = [r.lam[0] for r in recs]
    assert all(a > b > 2 * PI2 for a, b in zip(lam, lam[1:]))
    rows = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
    assert len(rows) == 5


def test_study_single_level():
    recs = run_study(spec(levels=1, nev=2, baseline=True))
    assert len(recs) == 1 and recs[0].work == 0 and recs[0].m == 0
    np.testing.assert_allclose(recs[0].lam, recs[0].lam_dir, rtol=1e-9)


def test_study_example2_six_columns():
    recs = run_study(spec(problem="example2", levels=3, nev=6, baseline=True, coarse_cells=4))
    assert all(len(r.lam) == 6 and len(r.err_lam) == 6 for r in recs)
    assert np.isfinite(recs[-1].err_lam).all()
    # extrapolated reference lies below every discrete value
    assert (recs[-1].lam > richardson(recs[-2].lam_dir, recs[-1].lam_dir)).all()


def test_study_without_baseline_on_example2_has_nan_errors():
    recs = run_study(spec(problem="example2", levels=2))
    assert np.isnan(recs[0].err_lam).all()


def test_work_column_recount(baseline_run):
    s, recs = baseline_run
    from cascadic_eig.cascadic import discretize
    from cascadic_eig.assembly import laplace
    from cascadic_eig.mesh import build_hierarchy
    disc = discretize(build_hierarchy(structured_unit_square(4), 4), laplace)
    assert recs[-1].work == s.config.nev * smoothing_work(disc, s.config)
    assert [r.m for r in recs] == [0, 9, 5, 2]


def test_csv_round_trip(tmp_path, baseline_run):
    s, recs = baseline_run
    path = tmp_path / "r.csv"
    write_csv(recs, path, s)
    back = read_csv(path)
    assert len(back) == len(recs)
    for r, b in zip(recs, back):
        assert (r.level, r.n_dofs, r.m, r.work) == (b.level, b.n_dofs, b.m, b.work)
        assert r.h == b.h
        for f in ("lam", "lam_dir", "err_lam", "err_u", "lam_aux", "err_aux"):
            np.testing.assert_allclose(getattr(b, f), getattr(r, f), rtol=1e-15)


def test_csv_metadata(baseline_run):
    s, recs = baseline_run
    text = csv_text(recs, s)
    meta = [ln for ln in text.splitlines() if ln.startswith("#")]
    assert any("seed=42" in ln for ln in meta)
    assert any("sigma=2.0" in ln for ln in meta)
    header = text.splitlines()[len(meta)]
    assert header.startswith("level,h,N,m,work,lam_1,lam_2,lam_dir_1")


def test_determinism(tmp_path):
    texts = []
    for i in range(2):
        path = tmp_path / f"{i}.csv"
        run_study(spec(levels=3, nev=2, baseline=True, verify=True, out=str(path)))
        texts.append(path.read_bytes())
    assert texts[0] == texts[1]


def test_plotdata_schema(tmp_path, baseline_run):
    _, recs = baseline_run
    path = tmp_path / "p.dat"
    emit_plotdata(recs, path)
    lines = path.read_text().splitlines()
    assert lines[1] == "# N work lam_1 lam_2 err_lam_1 err_lam_2 err_u_1 err_u_2"
    data = [ln.split() for ln in lines if not ln.startswith("#")]
    assert len(data) == 4 and all(len(row) == 2 + 3 * 2 for row in data)
    emit_plotdata(recs, path, baseline=False)
    data = [ln.split() for ln in path.read_text().splitlines() if not ln.startswith("#")]
    assert all(len(row) == 2 + 2 * 2 for row in data)


def test_plotdata_golden(tmp_path):
    recs = [LevelRecord(2, 0.25, 9, 4, 36, np.array([20.5]), np.array([0.75])),
            LevelRecord(3, 0.125, 49, 2, 134, np.array([19.9]), np.array([0.125]))]
    path = tmp_path / "g.dat"
    emit_plotdata(recs, path)
    assert path.read_text() == (
        "# plot on log-log axes: error columns against N or work\n"
        "# N work lam_1 err_lam_1\n"
        "9 36 20.5 0.75\n"
        "49 134 19.9 0.125\n")


def test_plotdata_empty(tmp_path):
    path = tmp_path / "e.dat"
    emit_plotdata([], path)
    assert all(ln.startswith("#") for ln in path.read_text().splitlines())


def test_bad_spec():
    with pytest.raises(FileNotFoundError):
        ExperimentSpec(mesh="/nonexistent/mesh")
    with pytest.raises(ValueError):
        ExperimentSpec(problem="helmholtz")
    with pytest.raises(ValueError):
        ExperimentSpec(coarse_cells=0)


def test_stage_reported(tmp_path):
    path = tmp_path / "bad.mesh"
    path.write_text("3 1\n0 0 1\n1 0 1\n0 1 1\n0 1 5\n")
    with pytest.raises(StudyError) as info:
        run_study(spec(mesh=str(path)))
    assert info.value.stage == "mesh"


def test_custom_mesh_study(tmp_path):
    path = tmp_path / "sq.mesh"
    save_mesh(structured_unit_square(4), path)
    recs = run_study(spec(mesh=str(path), levels=3, baseline=True))
    ref = run_study(spec(coarse_cells=4, levels=3, baseline=True))
    np.testing.assert_allclose(recs[-1].lam, ref[-1].lam, rtol=1e-14)
    # custom meshes get extrapolated references, not the analytic ones
    assert recs[-1].err_lam[0] != ref[-1].err_lam[0]


def _cli(*args):
    out = io.StringIO()
    return main(list(args), out=out), out.getvalue()


def test_cli_solve_stdout():
    code, text = _cli("solve", "--levels", "3", "--coarse-cells", "4")
    assert code == 0
    assert text.startswith("# cascadic_eig")
    assert len([ln for ln in text.splitlines() if not ln.startswith("#")]) == 4


def test_cli_study_and_files(tmp_path):
    csv_path, plot = tmp_path / "s.csv", tmp_path / "s.dat"
    code, text = _cli("study", "--levels", "4", "--coarse-cells", "4", "--nev", "2",
                      "--baseline", "--out", str(csv_path), "--plotdata", str(plot))
    assert code == 0
    assert "log2 error ratios" in text
    assert len(read_csv(csv_path)) == 4 and plot.exists()


def test_cli_verify():
    code, text = _cli("verify", "--levels", "3", "--coarse-cells", "4")
    assert code == 0
    assert "PASS" in text or "FAIL" in text


@pytest.mark.parametrize("args", [("solve", "--sigma", "0.5"),
                                  ("solve", "--mesh", "/nonexistent.mesh"),
                                  ("solve", "--levels", "0")])
def test_cli_config_errors(args):
    assert _cli(*args)[0] == 2


def test_cli_too_many_eigenpairs_is_config_error():
    assert _cli("solve", "--coarse-cells", "2", "--levels", "2", "--nev", "3")[0] == 2


def test_cli_solver_error(monkeypatch):
    import cascadic_eig.harness as harness

    def broken(*args, **kw):
        raise ArithmeticError("breakdown")

    monkeypatch.setattr(harness, "cascadic_solve", broken)
    assert _cli("solve", "--levels", "2")[0] == 1
