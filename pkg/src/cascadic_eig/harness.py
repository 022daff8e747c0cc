"""Convergence studies: drivers, reference values, rate tables and output files."""

import csv
import io
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import coefficients
from .cascadic import (SolverConfig, auxiliary_solve, cascadic_solve, discretize,
                       schedule)
from .dense_eig import direct_eigensolve
from .mesh import build_hierarchy, load_mesh, structured_unit_square
from .metrics import clusters, pair_errors

__all__ = [
    "StudyError",
    "ExperimentSpec",
    "LevelRecord",
    "run_study",
    "laplace_eigenvalues",
    "richardson",
    "reference_eigenvalues",
    "convergence_rates",
    "csv_text",
    "write_csv",
    "read_csv",
    "emit_plotdata",
]


class StudyError(RuntimeError):
    """A stage of a study failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class ExperimentSpec:
    """What to run.  ``mesh`` (a file path) replaces the structured coarse mesh."""

    problem: str = "laplace"
    coarse_cells: int = 8
    mesh: str = None
    config: SolverConfig = field(default_factory=SolverConfig)
    baseline: bool = False
    verify: bool = False
    seed: int = 42
    out: str = None

    def __post_init__(self):
        coefficients(self.problem)
        if self.mesh is not None and not Path(self.mesh).is_file():
            raise FileNotFoundError(f"mesh file {self.mesh} does not exist")
        if self.mesh is None and self.coarse_cells < 1:
            raise ValueError("coarse_cells must be >= 1")

    @property
    def analytic_reference(self):
        return self.problem == "laplace" and self.mesh is None


@dataclass
class LevelRecord:
    """Per-level results of a study.  Optional columns are ``None`` when not computed."""

    level: int
    h: float
    n_dofs: int
    m: int
    work: int
    lam: np.ndarray
    err_lam: np.ndarray
    lam_dir: np.ndarray = None
    err_u: np.ndarray = None
    lam_aux: np.ndarray = None
    err_aux: np.ndarray = None
    seconds: float = 0.0


def laplace_eigenvalues(q):
    """The ``q`` smallest Dirichlet eigenvalues ``pi^2 (i^2 + j^2)`` of the unit square."""
    r = int(np.ceil(np.sqrt(q))) + 2
    vals = sorted(i * i + j * j for i in range(1, r + 1) for j in range(1, r + 1))
    return np.pi ** 2 * np.array(vals[:q], dtype=float)


def richardson(coarse, fine):
    """Extrapolate an O(h^2) sequence from two consecutive halvings of h."""
    return (4.0 * np.asarray(fine) - np.asarray(coarse)) / 3.0


def reference_eigenvalues(spec, baseline=None):
    """Exact values for the unit-square Laplacian, extrapolated ones otherwise.

    ``baseline`` is the list of direct eigenvalue arrays per level; only the
    two finest are used.
    """
    q = spec.config.nev
    if spec.analytic_reference:
        return laplace_eigenvalues(q)
    if baseline is None or len(baseline) < 2:
        raise ValueError("extrapolated references need direct solutions on two levels")
    return richardson(baseline[-2], baseline[-1])


def _coarse_mesh(spec):
    if spec.mesh is not None:
        return load_mesh(spec.mesh)
    return structured_unit_square(spec.coarse_cells)


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except Exception as exc:
        raise StudyError(name, exc) from exc


def run_study(spec):
    """Run the cascadic solver (plus optional baseline/verification) and tabulate.

    Writes the CSV to ``spec.out`` when given.  Returns the records.
    """
    cfg = replace(spec.config, verify=spec.verify)
    coarse = _stage("mesh", _coarse_mesh, spec)
    hierarchy = _stage("refinement", build_hierarchy, coarse, cfg.levels,
                       coarse_space_level=cfg.coarse_space_level)
    t0 = time.perf_counter()
    disc = _stage("assembly", discretize, hierarchy, coefficients(spec.problem))
    t_assembly = time.perf_counter() - t0
    states = _stage("cascadic solve", cascadic_solve, disc, cfg)
    aux = _stage("auxiliary solve", auxiliary_solve, disc, cfg, states) if spec.verify else None
    need_baseline = spec.baseline or spec.verify
    baseline = None
    if need_baseline:
        baseline = [_stage(f"direct solve on level {s.level}", direct_eigensolve,
                           disc[s.level].a, disc[s.level].b, cfg.nev, seed=spec.seed)
                    for s in states]
    try:
        ref = reference_eigenvalues(spec, None if baseline is None else
                                    [b.values for b in baseline])
    except ValueError:
        ref = np.full(cfg.nev, np.nan)

    records = []
    for i, st in enumerate(states):
        lev = disc[st.level]
        rec = LevelRecord(
            level=st.level, h=lev.h, n_dofs=lev.n_dofs,
            m=schedule(st.level, cfg) if st.level > cfg.first_level else 0,
            work=st.work, lam=st.values, err_lam=np.abs(st.values - ref),
            seconds=sum(st.seconds.values()) + (t_assembly if i == 0 else 0.0))
        if baseline is not None:
            groups = clusters(baseline[i].values)
            rec.lam_dir = baseline[i].values
            rec.err_u = pair_errors(lev.a, lev.b, st.vectors, baseline[i].vectors, groups)
        if aux is not None:
            groups = clusters(aux[i].values)
            rec.lam_aux = aux[i].values
            rec.err_aux = pair_errors(lev.a, lev.b, st.vectors, aux[i].vectors, groups)
        records.append(rec)
    if spec.out is not None:
        write_csv(records, spec.out, spec)
    return records


def convergence_rates(records, column="err_lam", last=3):
    """``log2`` ratios of consecutive errors, one row per eigenpair.

    Returns ``(rates, summary, notes)`` where ``rates`` has shape
    ``(q, levels - 1)`` (NaN where an error was not positive) and ``summary``
    holds ``(min, max)`` per pair over the rates among the last ``last``
    levels.
    """
    err = np.array([getattr(r, column) for r in records], dtype=float).T
    notes = []
    bad = ~(err > 0)
    if bad.any():
        for j, k in zip(*np.nonzero(bad)):
            notes.append(f"pair {j + 1}, level {records[k].level}: "
                         f"non-positive error excluded")
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(bad, np.nan, np.log2(np.where(bad, 1.0, err)))
    rates = logs[:, :-1] - logs[:, 1:]
    tail = rates[:, -(last - 1):] if last > 1 else rates[:, :0]
    summary = [(float(np.nanmin(t)), float(np.nanmax(t))) if np.isfinite(t).any()
               else (np.nan, np.nan) for t in tail]
    return rates, summary, notes


_ARRAY_FIELDS = ("lam", "lam_dir", "err_lam", "err_u", "lam_aux", "err_aux")
_SCALAR_FIELDS = (("level", int), ("h", float), ("N", int), ("m", int), ("work", int))


def _columns(records):
    q = len(records[0].lam)
    cols = [name for name, _ in _SCALAR_FIELDS]
    present = [f for f in _ARRAY_FIELDS if getattr(records[0], f) is not None]
    for f in present:
        cols += [f"{f}_{j + 1}" for j in range(q)]
    return cols, present, q


def csv_text(records, spec=None):
    """CSV with ``#`` metadata lines, one header line and one row per level.

    Wall times are left out so that repeated runs give identical files.
    """
    buf = io.StringIO()
    buf.write(f"# cascadic_eig {__version__}\n")
    if spec is not None:
        cfg = spec.config
        buf.write(f"# problem={spec.problem} mesh={spec.mesh or 'structured'} "
                  f"coarse_cells={spec.coarse_cells}\n")
        buf.write(f"# levels={cfg.levels} nev={cfg.nev} smoother={cfg.smoother.value} "
                  f"sigma={cfg.sigma!r} zeta={cfg.zeta!r} mbar={cfg.mbar!r}\n")
        buf.write(f"# baseline={spec.baseline} verify={spec.verify} seed={spec.seed}\n")
    if records:
        cols, present, q = _columns(records)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            row = [r.level, repr(float(r.h)), r.n_dofs, r.m, r.work]
            for f in present:
                row += [repr(float(v)) for v in getattr(r, f)]
            w.writerow(row)
    return buf.getvalue()


def write_csv(records, path, spec=None):
    Path(path).write_text(csv_text(records, spec))


def read_csv(path):
    """Parse a file written by :func:`write_csv` back into records."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    if not lines:
        return []
    reader = csv.reader(lines)
    header = next(reader)
    records = []
    for row in reader:
        vals = dict(zip(header, row))
        arrays = {}
        for f in _ARRAY_FIELDS:
            keys = [c for c in header if c.rsplit("_", 1)[0] == f and c[len(f) + 1:].isdigit()]
            if keys:
                keys.sort(key=lambda c: int(c.rsplit("_", 1)[1]))
                arrays[f] = np.array([float(vals[c]) for c in keys])
        records.append(LevelRecord(level=int(vals["level"]), h=float(vals["h"]),
                                   n_dofs=int(vals["N"]), m=int(vals["m"]),
                                   work=int(vals["work"]), **arrays))
    return records


def emit_plotdata(records, path, baseline=None):
    """Whitespace table for log-log plots: N, work, eigenvalues and error columns.

    Columns: ``N work lam_1..q err_lam_1..q`` followed by ``err_u_1..q`` when
    the records carry baseline comparisons.
    """
    if baseline is None:
        baseline = bool(records) and records[0].err_u is not None
    q = len(records[0].lam) if records else 0
    cols = ["N", "work"] + [f"lam_{j + 1}" for j in range(q)] + \
        [f"err_lam_{j + 1}" for j in range(q)]
    if baseline:
        cols += [f"err_u_{j + 1}" for j in range(q)]
    lines = ["# plot on log-log axes: error columns against N or work",
             "# " + " ".join(cols)]
    for r in records:
        vals = [str(r.n_dofs), str(r.work)] + [repr(float(v)) for v in r.lam] + \
            [repr(float(v)) for v in r.err_lam]
        if baseline:
            vals += [repr(float(v)) for v in r.err_u]
        lines.append(" ".join(vals))
    Path(path).write_text("\n".join(lines) + "\n")
