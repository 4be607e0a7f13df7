"""Periodic cell problems on the holed unit cell, the effective tensor they
induce, and first-order corrector reconstruction.

The two cell solutions z_1, z_2 solve, in weak form over periodic test
functions, int grad(z_i - y_i) . grad(phi) = 0; the Neumann condition on the
hole boundary is natural. The effective tensor is computed by both of its
equivalent quadrature expressions and the difference is kept as a runtime
self-check: the discrete Galerkin solution satisfies the underlying matrix
identity exactly up to linear-solver tolerance, so a large residual means a
broken periodic solve, not discretization error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem
from .errors import (IdentityViolation, MeshMismatch, PointOutsideDomain,
                     SingularSystem)
from .fem import Field
from .geometry import CELL, Mesh, PointLocator


@dataclass(frozen=True)
class HomogTensor:
    """Effective 2x2 tensor with the cell volume and the self-check residual
    between its two defining quadrature expressions."""

    tensor: np.ndarray
    cell_volume: float
    identity_residual: float

    def __post_init__(self):
        t = np.asarray(self.tensor, dtype=np.float64)
        t.setflags(write=False)
        object.__setattr__(self, "tensor", t)

    @classmethod
    def identity(cls):
        return cls(np.eye(2), 1.0, 0.0)

    @property
    def isotropic_value(self) -> float:
        """Mean of the diagonal; meaningful when the tensor is isotropic."""
        return float(np.trace(self.tensor) / 2.0)


@dataclass(frozen=True)
class CorrectorBasis:
    """Cell solutions z_1, z_2 and their per-element gradients.

    gradients[e, i, :] is grad(z_i) on element e. Each z_i has zero mean
    over the cell and equal values on periodically paired nodes.
    """

    mesh: Mesh
    z: tuple[Field, Field]
    gradients: np.ndarray


def solve_cell_problems(cell_mesh: Mesh, tol=1e-10) -> CorrectorBasis:
    """Solve the two periodic cell problems on the holed unit cell.

    Assembles the plain Laplace stiffness, folds periodic pairs, uses the
    stiffness applied to the coordinate interpolant as right-hand side,
    gauges by pinning one degree of freedom and shifting to zero mean.
    """
    if cell_mesh.region != CELL or cell_mesh.periodic_pairs.shape[0] == 0:
        raise MeshMismatch("cell problems need a CELL mesh with periodic "
                           "pairs", region=cell_mesh.region)
    k = fem.assemble_stiffness(cell_mesh, 1.0)
    fold = fem.periodic_fold_map(cell_mesh)
    p = fem.fold_matrix(fold)
    k_red = (p.T @ k @ p).tocsr()

    fields = []
    grads = np.empty((cell_mesh.num_triangles, 2, 2))
    for i in range(2):
        rhs_red = p.T @ (k @ cell_mesh.nodes[:, i])
        op, rhs = fem.pin_dof(k_red, rhs_red, 0, 0.0)
        z_red = fem.solve_spd(op, rhs, tol=tol)
        z = z_red[fold]
        z -= fem.mean_value(cell_mesh, z)
        if abs(fem.mean_value(cell_mesh, z)) > 1e-10:
            raise SingularSystem("zero-mean gauge failed on cell solution",
                                 component=i)
        fields.append(Field(cell_mesh, z))
        grads[:, i, :] = fem.element_gradients(cell_mesh, z)
    return CorrectorBasis(cell_mesh, (fields[0], fields[1]), grads)


def homogenized_tensor(basis: CorrectorBasis, check_tol=1e-7) -> HomogTensor:
    """Effective tensor from the corrector basis.

    Evaluates both I - mean(J^t) and I - mean(J J^t) over the cell, records
    their maximal entry difference, and returns the symmetrized first form.
    Raises IDENTITY_VIOLATION when the two disagree beyond ``check_tol`` or
    the eigenvalues leave (0, 1].
    """
    mesh = basis.mesh
    areas = mesh.areas
    volume = mesh.total_area
    g = basis.gradients                       # (e, i, k) = d_k z_i
    jt = np.einsum("e,eji->ij", areas, g) / volume
    jjt = np.einsum("e,eik,ejk->ij", areas, g, g) / volume
    m_a = np.eye(2) - jt
    m_b = np.eye(2) - jjt
    residual = float(np.abs(m_a - m_b).max())
    if residual > check_tol:
        raise IdentityViolation(
            "the two effective-tensor expressions disagree; the periodic "
            "solve is broken", residual=residual, tol=check_tol)
    m0 = 0.5 * (m_a + m_a.T)
    eigs = np.linalg.eigvalsh(m0)
    if eigs.min() <= 0.0 or eigs.max() > 1.0 + 1e-8:
        raise IdentityViolation("effective tensor eigenvalues leave (0, 1]",
                                eigenvalues=tuple(eigs))
    return HomogTensor(m0, volume, residual)


# ---------------------------------------------------------------------------
# interpolation of macro fields and corrector reconstruction
# ---------------------------------------------------------------------------

def interpolate(field: Field, points, locator: PointLocator | None = None,
                tol=1e-9):
    """P1 interpolation of a field at arbitrary points, with the containing
    element per point; raises if a point lies outside the mesh."""
    mesh = field.mesh
    loc = locator or PointLocator(mesh)
    elems, bary = loc.locate(points, tol=tol)
    if (elems < 0).any():
        bad = np.flatnonzero(elems < 0)[0]
        raise PointOutsideDomain("interpolation point outside the mesh",
                                 point=tuple(np.atleast_2d(points)[bad]))
    vals = (field.values[mesh.triangles[elems]] * bary).sum(axis=1)
    return vals, elems


def _cell_coordinates(points, epsilon):
    y = np.mod(points / epsilon, 1.0)
    return np.where(y >= 1.0, y - 1.0, y)


def reconstruct_corrector(u0: Field, basis: CorrectorBasis, epsilon: float,
                          perforated_mesh: Mesh) -> Field:
    """Nodal interpolant of u0(x) + eps * u1(x, x/eps) on the perforated
    mesh, with u1 = -sum_i z_i(x/eps) d_i u0(x) (additive gauge zero).

    Cell coordinates landing inside the hole are snapped to the circle when
    within one cell-mesh cell of it; deeper misses raise
    POINT_OUTSIDE_DOMAIN.
    """
    macro = u0.mesh
    macro_loc = PointLocator(macro)
    pts = perforated_mesh.nodes
    u0_vals, macro_elems = interpolate(u0, pts, macro_loc)
    gu0 = fem.element_gradients(macro, u0.values)[macro_elems]  # (k, 2)

    cell_mesh = basis.mesh
    cell_loc = PointLocator(cell_mesh)
    y = _cell_coordinates(pts, epsilon)
    elems, bary = cell_loc.locate(y, tol=1e-9)
    missing = np.flatnonzero(elems < 0)
    if missing.size:
        center = np.array([0.5, 0.5])
        radius = _hole_radius(cell_mesh)
        snap = cell_mesh.h_max
        rel = y[missing] - center
        dist = np.linalg.norm(rel, axis=1)
        if (dist < radius - snap).any() or (dist == 0.0).any():
            raise PointOutsideDomain(
                "cell coordinate lies strictly inside the hole",
                worst_depth=float((radius - dist).max()))
        y_snap = center + radius * rel / dist[:, None]
        e2, b2 = cell_loc.locate(y_snap, tol=1e-6)
        if (e2 < 0).any():
            raise PointOutsideDomain("cell coordinate could not be snapped "
                                     "onto the hole boundary")
        elems[missing], bary[missing] = e2, b2

    z_at = np.stack([(zf.values[cell_mesh.triangles[elems]] * bary).sum(axis=1)
                     for zf in basis.z], axis=1)          # (k, 2)
    u1 = -(z_at * gu0).sum(axis=1)
    return Field(perforated_mesh, u0_vals + epsilon * u1)


def _hole_radius(cell_mesh: Mesh) -> float:
    from .geometry import HOLE
    hole_nodes = cell_mesh.boundary_nodes(HOLE)
    if hole_nodes.size == 0:
        return 0.0
    rel = cell_mesh.nodes[hole_nodes] - np.array([0.5, 0.5])
    return float(np.linalg.norm(rel, axis=1).mean())
