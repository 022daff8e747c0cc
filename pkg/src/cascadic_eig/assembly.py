"""Linear finite element assembly on a triangulation.

Matrices are ``scipy.sparse.csr_matrix`` objects holding both triangles of a
symmetric matrix, restricted to interior (non-Dirichlet) vertices.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "AssemblyError",
    "CoefficientSet",
    "DofMap",
    "laplace",
    "example2",
    "coefficients",
    "dof_map",
    "local_stiffness",
    "local_mass",
    "assemble_stiffness",
    "assemble_mass",
    "build_prolongation",
    "compose_prolongations",
    "galerkin_check",
    "a_norm",
    "b_norm",
    "is_symmetric",
    "write_triplets",
    "read_triplets",
]


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class CoefficientSet:
    """Coefficients of ``-div(A grad u) + phi u = lambda rho u``.

    Each callable takes coordinate arrays ``x, y`` of equal shape.
    ``diffusion`` returns an array of shape ``x.shape + (2, 2)``; ``potential``
    and ``density`` return arrays of shape ``x.shape``.  ``constant`` marks
    coefficient sets the quadrature integrates exactly.
    """

    name: str
    diffusion: object
    potential: object
    density: object
    constant: bool = False


def _identity(x, y):
    out = np.zeros(np.shape(x) + (2, 2))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = 1.0
    return out


def _zero(x, y):
    return np.zeros(np.shape(x))


def _one(x, y):
    return np.ones(np.shape(x))


def _ex2_diffusion(x, y):
    s, t = x - 0.5, y - 0.5
    out = np.empty(np.shape(x) + (2, 2))
    out[..., 0, 0] = 1.0 + s * s
    out[..., 0, 1] = out[..., 1, 0] = s * t
    out[..., 1, 1] = 1.0 + t * t
    return out


def _ex2_potential(x, y):
    return np.exp((x - 0.5) * (y - 0.5))


def _ex2_density(x, y):
    return 1.0 + (x - 0.5) * (y - 0.5)


laplace = CoefficientSet("laplace", _identity, _zero, _one, constant=True)
example2 = CoefficientSet("example2", _ex2_diffusion, _ex2_potential, _ex2_density)

_BUILTIN = {"laplace": laplace, "example2": example2}


def coefficients(name):
    """Look up a built-in coefficient set by name."""
    try:
        return _BUILTIN[name]
    except KeyError:
        raise AssemblyError(f"unknown coefficient set {name!r}; "
                            f"choose from {sorted(_BUILTIN)}") from None


@dataclass(frozen=True, eq=False)
class DofMap:
    """Numbering of interior vertices; ``interior_of_vertex`` is -1 on the boundary."""

    interior_of_vertex: np.ndarray
    vertex_of_interior: np.ndarray

    @property
    def n_dofs(self):
        return self.vertex_of_interior.shape[0]


def dof_map(t):
    interior = np.nonzero(~t.boundary)[0]
    index = np.full(t.n_vertices, -1, dtype=np.int64)
    index[interior] = np.arange(interior.size)
    return DofMap(index, interior)


# barycentric coordinates of the three edge midpoints; row q is the midpoint
# of the edge opposite local vertex q
_BARY = np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]])


def _geometry(vertices, triangles):
    p = vertices[triangles]  # (T, 3, 2)
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    area = 0.5 * det
    # gradients of the barycentric coordinates, (T, 3, 2)
    grad = np.empty((len(triangles), 3, 2))
    grad[:, 1, 0] = e2[:, 1] / det
    grad[:, 1, 1] = -e2[:, 0] / det
    grad[:, 2, 0] = -e1[:, 1] / det
    grad[:, 2, 1] = e1[:, 0] / det
    grad[:, 0] = -grad[:, 1] - grad[:, 2]
    qpts = np.einsum("qi,tid->tqd", _BARY, p)  # (T, 3, 2)
    return area, grad, qpts


def _evaluate(fn, qpts, what):
    try:
        val = np.asarray(fn(qpts[..., 0], qpts[..., 1]), dtype=float)
    except Exception as exc:  # user-supplied callables may fail arbitrarily
        raise AssemblyError(f"evaluating {what} failed: {exc}") from exc
    if not np.all(np.isfinite(val)):
        raise AssemblyError(f"{what} is not finite at some quadrature point")
    return val


def local_stiffness(vertices, triangles, c=laplace):
    """Element matrices of ``int grad u . A grad v + phi u v``, shape (T, 3, 3)."""
    area, grad, qpts = _geometry(np.asarray(vertices, float), np.asarray(triangles))
    amat = _evaluate(c.diffusion, qpts, "diffusion")  # (T, 3, 2, 2)
    if not np.allclose(amat[..., 0, 1], amat[..., 1, 0], rtol=1e-14, atol=0):
        raise AssemblyError("diffusion tensor is not symmetric")
    det = amat[..., 0, 0] * amat[..., 1, 1] - amat[..., 0, 1] * amat[..., 1, 0]
    if ((amat[..., 0, 0] <= 0) | (det <= 0)).any():
        raise AssemblyError("diffusion tensor is not positive definite "
                            "at some quadrature point")
    amean = amat.mean(axis=1)  # gradients are constant per element
    k = np.einsum("tid,tde,tje->tij", grad, amean, grad) * area[:, None, None]
    phi = _evaluate(c.potential, qpts, "potential")
    if (phi < 0).any():
        raise AssemblyError("potential is negative at some quadrature point")
    if phi.any():
        k += np.einsum("tq,qi,qj->tij", phi, _BARY, _BARY) * (area / 3.0)[:, None, None]
    return k


def local_mass(vertices, triangles, c=laplace):
    """Consistent element mass matrices of ``int rho u v``, shape (T, 3, 3)."""
    area, _, qpts = _geometry(np.asarray(vertices, float), np.asarray(triangles))
    rho = _evaluate(c.density, qpts, "density")
    if (rho <= 0).any():
        raise AssemblyError("density is not positive at some quadrature point")
    return np.einsum("tq,qi,qj->tij", rho, _BARY, _BARY) * (area / 3.0)[:, None, None]


def _scatter(t, dofs, local):
    n = t.n_vertices if dofs is None else dofs.n_dofs
    idx = t.triangles if dofs is None else dofs.interior_of_vertex[t.triangles]
    rows = np.broadcast_to(idx[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(idx[:, None, :], local.shape).ravel()
    vals = local.ravel()
    keep = (rows >= 0) & (cols >= 0)
    m = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return m


def assemble_stiffness(t, dofs=None, c=laplace):
    """Stiffness matrix on interior DOFs (all vertices if ``dofs`` is None)."""
    return _scatter(t, dofs, local_stiffness(t.vertices, t.triangles, c))


def assemble_mass(t, dofs=None, c=laplace):
    """Consistent mass matrix on interior DOFs (all vertices if ``dofs`` is None)."""
    return _scatter(t, dofs, local_mass(t.vertices, t.triangles, c))


def build_prolongation(rmap, coarse_dofs, fine_dofs):
    """Nodal interpolation from coarse interior DOFs to fine interior DOFs."""
    if rmap.vertex_origin.shape[0] != fine_dofs.interior_of_vertex.shape[0]:
        raise AssemblyError("refinement map and fine DOF map disagree on vertex count")
    if rmap.n_coarse_vertices != coarse_dofs.interior_of_vertex.shape[0]:
        raise AssemblyError("refinement map and coarse DOF map disagree on vertex count")
    fine_vertices = fine_dofs.vertex_of_interior
    origin = rmap.vertex_origin[fine_vertices]
    inherited = origin[:, 0] == origin[:, 1]
    if (coarse_dofs.interior_of_vertex[origin[inherited, 0]] < 0).any():
        raise AssemblyError("interior fine vertex inherited from a boundary coarse vertex")
    rows, cols, vals = [], [], []
    fine_rows = np.arange(fine_vertices.size)
    for end in (0, 1):
        c = coarse_dofs.interior_of_vertex[origin[:, end]]
        w = np.where(inherited, 1.0 if end == 0 else 0.0, 0.5)
        keep = (c >= 0) & (w > 0)
        rows.append(fine_rows[keep])
        cols.append(c[keep])
        vals.append(w[keep])
    p = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(fine_dofs.n_dofs, coarse_dofs.n_dofs)).tocsr()
    p.sort_indices()
    return p


def compose_prolongations(prolongations):
    """Product ``P_{k-1} ... P_1`` of consecutive prolongations, coarse first."""
    out = None
    for p in prolongations:
        out = p if out is None else (p @ out).tocsr()
    return out


def _rel_fro(x, ref):
    diff = sp.csr_matrix(x - ref)
    nref = sp.linalg.norm(ref) if sp.issparse(ref) else np.linalg.norm(ref)
    nd = sp.linalg.norm(diff) if diff.nnz else 0.0
    return nd / nref


def galerkin_check(a_f, b_f, p, a_c, b_c):
    """Largest relative Frobenius gap between ``P^T M_f P`` and ``M_c``."""
    a_g = (p.T @ a_f @ p).tocsr()
    b_g = (p.T @ b_f @ p).tocsr()
    return max(_rel_fro(a_g, a_c), _rel_fro(b_g, b_c))


def _quad_norm(m, v):
    v = np.asarray(v, dtype=float)
    if m.shape[0] != v.shape[0]:
        raise ValueError(f"dimension mismatch: matrix {m.shape}, vector {v.shape}")
    q = float(v @ (m @ v))
    if q < 0:
        scale = float(abs(v) @ (abs(m) @ abs(v)))
        if q < -1e-14 * max(scale, 1.0):
            raise ValueError("negative quadratic form; matrix is not positive semidefinite")
        q = 0.0
    return np.sqrt(q)


def a_norm(a, v):
    """Energy norm ``sqrt(v^T A v)``."""
    return _quad_norm(a, v)


def b_norm(b, v):
    """Mass norm ``sqrt(v^T B v)``."""
    return _quad_norm(b, v)


def is_symmetric(m, rtol=1e-14):
    m = sp.csr_matrix(m)
    pattern = m.copy()
    pattern.data[:] = 1.0
    if (pattern != pattern.T).nnz:
        return False
    diff = abs(m - m.T).max() if m.nnz else 0.0
    return diff <= rtol * abs(m).max()


def write_triplets(m, path):
    """Write ``dim nnz`` followed by ``i j value`` lines (0-based)."""
    m = sp.coo_matrix(m)
    with open(path, "w") as fh:
        fh.write(f"{m.shape[0]} {m.nnz}\n")
        for i, j, v in zip(m.row, m.col, m.data):
            fh.write(f"{i} {j} {float(v)!r}\n")


def read_triplets(path):
    with open(path) as fh:
        dim, nnz = (int(s) for s in fh.readline().split())
        data = np.loadtxt(fh, ndmin=2) if nnz else np.empty((0, 3))
    if data.shape[0] != nnz:
        raise ValueError(f"expected {nnz} entries, found {data.shape[0]}")
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))),
                         shape=(dim, dim))
