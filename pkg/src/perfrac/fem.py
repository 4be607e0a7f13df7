"""P1 finite-element machinery shared by every solver in the package.

Conventions fixed here and relied on everywhere else:

* weighted stiffness uses one-point (centroid) quadrature with the scalar
  weight evaluated as the mean of its vertex values on each element;
* the quadratic "(1-v)^2"-type terms use vertex (mass-lumped) quadrature,
  which keeps the bound-constrained subproblem friendly to projected
  Gauss-Seidel;
* Dirichlet conditions are imposed by symmetric elimination, periodic
  conditions by folding slave degrees of freedom onto masters;
* all systems are solved by diagonally preconditioned conjugate gradients,
  except box-constrained minimization which uses projected Gauss-Seidel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit

from .errors import (InfeasibleBounds, MeshMismatch, NoConvergence,
                     SingularSystem)
from .geometry import Mesh, OUTER

IDENTITY_2X2 = np.eye(2)


@dataclass(frozen=True)
class Field:
    """Nodal scalar function on a mesh."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.shape != (self.mesh.num_nodes,):
            raise MeshMismatch("field length does not match node count",
                               expected=self.mesh.num_nodes,
                               got=values.shape)
        if not np.isfinite(values).all():
            raise MeshMismatch("field contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, mesh, value):
        return cls(mesh, np.full(mesh.num_nodes, float(value)))

    @classmethod
    def from_callable(cls, mesh, fn):
        return cls(mesh, np.asarray(fn(mesh.nodes), dtype=np.float64))


@dataclass(frozen=True)
class CoefficientSpec:
    """Element coefficient: optional nodal scalar field (taken per element as
    the mean of vertex values) times an optional constant 2x2 symmetric
    positive-definite matrix, with an overall constant factor."""

    constant: float = 1.0
    matrix: np.ndarray | None = None
    scalar_field: Field | None = None

    def __post_init__(self):
        if self.matrix is not None:
            m = np.asarray(self.matrix, dtype=np.float64)
            if m.shape != (2, 2) or not np.allclose(m, m.T, atol=1e-12):
                raise ValueError("coefficient matrix must be 2x2 symmetric")
            if np.linalg.eigvalsh(m).min() <= 0:
                raise ValueError("coefficient matrix must be positive definite")
            object.__setattr__(self, "matrix", m)

    def element_data(self, mesh: Mesh):
        """Per-element scalar weights and the 2x2 matrix part."""
        w = np.full(mesh.num_triangles, self.constant)
        if self.scalar_field is not None:
            if self.scalar_field.mesh is not mesh:
                raise MeshMismatch("coefficient field lives on another mesh")
            w = w * self.scalar_field.values[mesh.triangles].mean(axis=1)
        m = self.matrix if self.matrix is not None else IDENTITY_2X2
        return w, m


def _as_spec(coeff) -> CoefficientSpec:
    if isinstance(coeff, CoefficientSpec):
        return coeff
    if isinstance(coeff, Field):
        return CoefficientSpec(scalar_field=coeff)
    if np.ndim(coeff) == 2:
        return CoefficientSpec(matrix=np.asarray(coeff, dtype=np.float64))
    return CoefficientSpec(constant=float(coeff))


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def assemble_stiffness(mesh: Mesh, coeff=1.0) -> sp.csr_matrix:
    """Stiffness matrix of the form a(u, w) = int coeff grad(u) . grad(w) dx.

    For P1 fields the per-element coefficient is piecewise constant, so the
    integral is one-point quadrature; natural (Neumann) conditions on
    untouched boundary parts are automatic.
    """
    spec = _as_spec(coeff)
    w, m = spec.element_data(mesh)
    g = mesh.grads                      # (e, 2, 3)
    ke = np.einsum("e,eki,kl,elj->eij", w * mesh.areas, g, m, g,
                   optimize=True)
    tris = mesh.triangles
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    k = sp.coo_matrix((ke.ravel(), (rows, cols)),
                      shape=(mesh.num_nodes, mesh.num_nodes)).tocsr()
    return (k + k.T) * 0.5


def element_gradients(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    """Per-element gradient of a P1 nodal field, shape (m, 2)."""
    return np.einsum("eki,ei->ek", mesh.grads, values[mesh.triangles])


# ---------------------------------------------------------------------------
# constraints
# ---------------------------------------------------------------------------

def apply_dirichlet(mesh: Mesh, op: sp.csr_matrix, rhs: np.ndarray,
                    values, tag=OUTER):
    """Constrain tagged boundary nodes to the given values by symmetric
    row/column elimination; the constrained system keeps the SPD property."""
    if isinstance(values, Field):
        if values.mesh is not mesh:
            raise MeshMismatch("boundary values live on another mesh")
        values = values.values
    bc = mesh.boundary_nodes(tag)
    if bc.size == 0:
        raise MeshMismatch("no boundary edges carry the requested tag",
                           tag=tag)
    g = np.zeros(mesh.num_nodes)
    g[bc] = np.asarray(values)[bc]
    rhs = rhs - op @ g
    free = np.ones(mesh.num_nodes)
    free[bc] = 0.0
    d_free = sp.diags(free)
    pin = sp.diags(1.0 - free)
    op = (d_free @ op @ d_free + pin).tocsr()
    rhs = free * rhs + (1.0 - free) * g
    return op, rhs


def periodic_fold_map(mesh: Mesh) -> np.ndarray:
    """Map every node to the representative of its periodic equivalence
    class, numbered contiguously in increasing node order."""
    parent = np.arange(mesh.num_nodes)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for m, s in mesh.periodic_pairs:
        rm, rs = find(m), find(s)
        if rm != rs:
            parent[max(rm, rs)] = min(rm, rs)
    roots = np.array([find(i) for i in range(mesh.num_nodes)])
    uniq, fold = np.unique(roots, return_inverse=True)
    return fold


def fold_matrix(fold: np.ndarray) -> sp.csr_matrix:
    n = fold.size
    nred = int(fold.max()) + 1
    return sp.coo_matrix((np.ones(n), (np.arange(n), fold)),
                         shape=(n, nred)).tocsr()


def apply_periodic(mesh: Mesh, op: sp.csr_matrix, rhs: np.ndarray):
    """Fold slave degrees of freedom onto their masters.

    The folded operator of a pure Neumann/periodic form still has the
    constant function in its kernel; gauge it afterwards (pin one degree of
    freedom, then shift the expanded solution to zero mean).
    """
    if mesh.periodic_pairs.shape[0] == 0:
        raise MeshMismatch("mesh carries no periodic pairs")
    fold = periodic_fold_map(mesh)
    p = fold_matrix(fold)
    return (p.T @ op @ p).tocsr(), p.T @ rhs, fold


def pin_dof(op: sp.csr_matrix, rhs: np.ndarray, index: int, value=0.0):
    """Dirichlet-style elimination of a single degree of freedom."""
    rhs = rhs - op[:, [index]].toarray().ravel() * value
    keep = np.ones(rhs.size)
    keep[index] = 0.0
    d = sp.diags(keep)
    op = (d @ op @ d + sp.diags(1.0 - keep)).tocsr()
    rhs = keep * rhs
    rhs[index] = value
    return op, rhs


def mean_value(mesh: Mesh, values: np.ndarray) -> float:
    """Exact P1 mean over the mesh."""
    tri_means = values[mesh.triangles].mean(axis=1)
    return float((mesh.areas * tri_means).sum() / mesh.total_area)


# ---------------------------------------------------------------------------
# linear and box-constrained solvers
# ---------------------------------------------------------------------------

def solve_spd(op: sp.csr_matrix, rhs: np.ndarray, tol=1e-10,
              max_iters=None) -> np.ndarray:
    """Diagonally preconditioned conjugate gradients.

    Stops at relative residual ||b - A x|| <= tol * ||b||; deterministic for
    fixed inputs. Raises NO_CONVERGENCE past the iteration cap, which in
    this package signals an ill-posed assembly rather than a tight budget.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    n = rhs.size
    if max_iters is None:
        max_iters = 50 * n
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros(n)
    diag = op.diagonal()
    if diag.min() <= 0.0:
        raise SingularSystem("operator has a non-positive diagonal entry",
                             min_diag=float(diag.min()))
    inv_diag = 1.0 / diag
    x = np.zeros(n)
    r = rhs.copy()
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    for _ in range(max_iters):
        ap = op @ p
        alpha = rz / (p @ ap)
        x += alpha * p
        r -= alpha * ap
        if np.linalg.norm(r) <= tol * bnorm:
            return x
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NoConvergence("conjugate gradients exceeded the iteration cap",
                        iterations=max_iters,
                        relative_residual=float(np.linalg.norm(r) / bnorm))


@njit(cache=True)
def _pgs_sweep(indptr, indices, data, diag, rhs, x, lower, upper):
    for i in range(x.size):
        s = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j != i:
                s += data[k] * x[j]
        xi = (rhs[i] - s) / diag[i]
        if xi < lower[i]:
            xi = lower[i]
        elif xi > upper[i]:
            xi = upper[i]
        x[i] = xi


def kkt_violation(op, rhs, x, lower, upper, scale=None):
    """Componentwise optimality violation of min 1/2 x'Kx - x'b on a box.

    With r = Kx - b the exact conditions are r = 0 strictly inside the box,
    r <= 0 where the upper bound is active and r >= 0 where the lower bound
    is active; the returned value is the largest violation. ``scale``
    divides the residual componentwise (pass the diagonal to measure the
    violation in the units of the iterate instead of the residual).
    """
    r = op @ x - rhs
    if scale is not None:
        r = r / scale
    at_lower = x <= lower
    at_upper = x >= upper
    interior = ~(at_lower | at_upper)
    viol = 0.0
    if interior.any():
        viol = float(np.abs(r[interior]).max())
    up = at_upper & ~at_lower
    if up.any():
        viol = max(viol, float(np.maximum(r[up], 0.0).max()))
    lo = at_lower & ~at_upper
    if lo.any():
        viol = max(viol, float(np.maximum(-r[lo], 0.0).max()))
    return viol


def solve_box_constrained(op: sp.csr_matrix, rhs: np.ndarray,
                          lower, upper, tol=1e-6, max_sweeps=None,
                          x0=None, xtol=None) -> np.ndarray:
    """Projected Gauss-Seidel for min 1/2 x'Kx - x'b with lower <= x <= upper.

    Each nodal update is the exact one-dimensional minimizer clipped to the
    box, so the objective decreases monotonically sweep by sweep. Iterates
    until the KKT violation (see ``kkt_violation``) drops below ``tol``;
    with ``xtol`` set, the diagonally scaled violation must additionally
    drop below it (this measures optimality in iterate units, which outer
    fixed-point loops need to stay above the solver's noise floor).
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    n = rhs.size
    lower = np.ascontiguousarray(np.broadcast_to(
        np.asarray(lower, dtype=np.float64), rhs.shape))
    upper = np.ascontiguousarray(np.broadcast_to(
        np.asarray(upper, dtype=np.float64), rhs.shape))
    if (lower > upper).any():
        raise InfeasibleBounds("lower bound exceeds upper bound somewhere",
                               worst=float((lower - upper).max()))
    if max_sweeps is None:
        max_sweeps = 100 * n
    diag = op.diagonal()
    if diag.min() <= 0.0:
        raise SingularSystem("operator has a non-positive diagonal entry")
    x = np.clip(rhs / diag if x0 is None else np.asarray(x0, dtype=np.float64),
                lower, upper)
    op = op.tocsr()
    for _ in range(max_sweeps):
        _pgs_sweep(op.indptr, op.indices, op.data, diag, rhs, x, lower, upper)
        if kkt_violation(op, rhs, x, lower, upper) <= tol and (
                xtol is None
                or kkt_violation(op, rhs, x, lower, upper, diag) <= xtol):
            return x
    raise NoConvergence("projected Gauss-Seidel exceeded the sweep cap",
                        sweeps=max_sweeps,
                        violation=kkt_violation(op, rhs, x, lower, upper))


# ---------------------------------------------------------------------------
# quadrature: energies and norms
# ---------------------------------------------------------------------------

def _check_same_mesh(mesh, *fields):
    for f in fields:
        if isinstance(f, Field) and f.mesh is not mesh:
            raise MeshMismatch("field lives on another mesh")


def _values(f):
    return f.values if isinstance(f, Field) else np.asarray(f, dtype=np.float64)


def elastic_energy(mesh: Mesh, u, v, eta: float, tensor=None) -> float:
    """1/2 int (v^2 + eta) (M grad u) . grad u with the vertex-mean weight."""
    _check_same_mesh(mesh, u, v)
    uv, vv = _values(u), _values(v)
    m = IDENTITY_2X2 if tensor is None else np.asarray(tensor)
    w = (vv**2)[mesh.triangles].mean(axis=1) + eta
    gu = element_gradients(mesh, uv)
    return float(0.5 * (mesh.areas * w * np.einsum(
        "ei,ij,ej->e", gu, m, gu)).sum())


def damage_energy(mesh: Mesh, v, gamma: float, tensor=None) -> float:
    """int (1-v)^2/(4 gamma) + gamma (M grad v) . grad v, with the first
    term integrated by the vertex (lumped) rule."""
    _check_same_mesh(mesh, v)
    vv = _values(v)
    m = IDENTITY_2X2 if tensor is None else np.asarray(tensor)
    gv = element_gradients(mesh, vv)
    grad_part = gamma * (mesh.areas * np.einsum("ei,ij,ej->e", gv, m, gv)).sum()
    mass_part = (mesh.lumped_mass * (1.0 - vv)**2).sum() / (4.0 * gamma)
    return float(grad_part + mass_part)


def load_work_rate(mesh: Mesh, u, v, eta: float, tensor, g_dot) -> float:
    """int (eta + v^2) (M grad u) . grad(g_dot) with the vertex-mean weight;
    g_dot is the nodal interpolant of the boundary datum's rate."""
    _check_same_mesh(mesh, u, v, g_dot)
    uv, vv, gv = _values(u), _values(v), _values(g_dot)
    m = IDENTITY_2X2 if tensor is None else np.asarray(tensor)
    w = (vv**2)[mesh.triangles].mean(axis=1) + eta
    gu = element_gradients(mesh, uv)
    gg = element_gradients(mesh, gv)
    return float((mesh.areas * w * np.einsum("ei,ij,ej->e", gu, m, gg)).sum())


def l2_norm(mesh: Mesh, f) -> float:
    """Exact L2 norm of a P1 field."""
    _check_same_mesh(mesh, f)
    a = _values(f)[mesh.triangles]
    sq = (a**2).sum(axis=1) + a[:, 0] * a[:, 1] + a[:, 0] * a[:, 2] \
        + a[:, 1] * a[:, 2]
    return float(np.sqrt(np.maximum((mesh.areas / 6.0 * sq).sum(), 0.0)))


def h1_seminorm(mesh: Mesh, f, tensor=None) -> float:
    """Gradient seminorm, optionally weighted by a constant SPD matrix."""
    _check_same_mesh(mesh, f)
    m = IDENTITY_2X2 if tensor is None else np.asarray(tensor)
    g = element_gradients(mesh, _values(f))
    return float(np.sqrt(np.maximum(
        (mesh.areas * np.einsum("ei,ij,ej->e", g, m, g)).sum(), 0.0)))
