"""Cascadic multigrid eigensolver for 2D elliptic problems with linear finite elements."""

__version__ = "0.1.0"

from .mesh import (Triangulation, MeshHierarchy, structured_unit_square, load_mesh,
                   save_mesh, refine_regular, build_hierarchy, mesh_size)
from .assembly import (CoefficientSet, laplace, example2, dof_map, assemble_stiffness,
                       assemble_mass, build_prolongation, galerkin_check, a_norm, b_norm)
from .linalg import SmootherKind, smooth, solve_cg
from .dense_eig import EigenBasis, solve_gevp, solve_gevp_sparse_small, direct_eigensolve
from .cascadic import (SolverConfig, EigenState, discretize, schedule, smooth_correction,
                       cascadic_solve, auxiliary_solve, verify_theorems)
from .harness import (ExperimentSpec, LevelRecord, run_study, reference_eigenvalues,
                      convergence_rates, emit_plotdata)
