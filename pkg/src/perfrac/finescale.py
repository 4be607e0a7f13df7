"""Fine-scale reference model on the perforated domain.

This is the original model the homogenized one was derived from: identity
gradient weighting, perforated mesh, natural Neumann conditions on the hole
boundaries. It reuses the evolution engine wholesale; the only differences
are the mesh and the tensor. The comparison utilities quantify how well the
homogenized solution (optionally corrected to first order) tracks the
fine-scale one as the microstructure scale decreases.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import fem, fracture
from .cell import CorrectorBasis, HomogTensor, interpolate, \
    reconstruct_corrector
from .fem import Field
from .fracture import ModelParams, Trajectory
from .geometry import CellGeometry, MacroDomain, PointLocator, \
    build_perforated_mesh
from .loads import LoadProgram


@dataclass(frozen=True)
class FineState:
    """Snapshot of the fine-scale run at one pseudo-time."""

    s: float
    u_eps: Field
    v_eps: Field
    elastic: float
    surface: float
    work_accum: float
    balance_residual: float

    @classmethod
    def from_trajectory(cls, traj: Trajectory):
        last = traj.records[-1]
        return cls(last.s, traj.final_u, traj.final_v, last.elastic,
                   last.surface, last.work_accum, last.balance_residual)


@dataclass(frozen=True)
class ErrorReport:
    """Relative errors of the homogenized solution against the fine-scale
    one, interpolated onto the perforated mesh."""

    epsilon: float
    rel_l2_u: float
    rel_l2_u_corrected: float
    rel_h1_u: float
    rel_h1_u_corrected: float
    rel_l2_v: float


def fine_energies(u: Field, v: Field, params: ModelParams):
    """Elastic and surface energies with identity weighting on the
    perforated mesh; Neumann hole boundaries are natural."""
    mesh = u.mesh
    return (fem.elastic_energy(mesh, u, v, params.eta),
            fem.damage_energy(mesh, v, params.gamma))


def fine_evolve(load: LoadProgram, params: ModelParams, epsilon: float,
                geom: CellGeometry, dom: MacroDomain | None = None,
                v_init: Field | None = None, freeze_v: bool = False,
                field_stride: int = 0) -> Trajectory:
    """Evolve the original model on the perforated domain.

    Identical stepping to the homogenized evolution with the identity
    tensor; the mesh is reachable from the returned fields.
    """
    dom = dom or MacroDomain()
    mesh = build_perforated_mesh(dom, epsilon, geom)
    params_fine = replace(params, tensor=HomogTensor.identity())
    return fracture.evolve(mesh, load, params_fine, v_init=v_init,
                           freeze_v=freeze_v, field_stride=field_stride)


def _rel(num: float, den: float) -> float:
    return num / den if den > 0 else num


def compare_to_homog(fine: FineState, homog_u: Field, homog_v: Field,
                     basis: CorrectorBasis, epsilon: float) -> ErrorReport:
    """Relative L2 and gradient-seminorm errors of the homogenized fields
    against the fine-scale ones, with and without the first-order corrector."""
    mesh = fine.u_eps.mesh
    loc = PointLocator(homog_u.mesh)
    u0_vals, _ = interpolate(homog_u, mesh.nodes, loc)
    v0_vals, _ = interpolate(homog_v, mesh.nodes, loc)
    u_corr = reconstruct_corrector(homog_u, basis, epsilon, mesh)

    du = fine.u_eps.values - u0_vals
    duc = fine.u_eps.values - u_corr.values
    dv = fine.v_eps.values - v0_vals

    l2_u = fem.l2_norm(mesh, fine.u_eps)
    h1_u = fem.h1_seminorm(mesh, fine.u_eps)
    l2_v = fem.l2_norm(mesh, fine.v_eps)
    return ErrorReport(
        epsilon=epsilon,
        rel_l2_u=_rel(fem.l2_norm(mesh, du), l2_u),
        rel_l2_u_corrected=_rel(fem.l2_norm(mesh, duc), l2_u),
        rel_h1_u=_rel(fem.h1_seminorm(mesh, du), h1_u),
        rel_h1_u_corrected=_rel(fem.h1_seminorm(mesh, duc), h1_u),
        rel_l2_v=_rel(fem.l2_norm(mesh, dv), l2_v),
    )


def hole_flux_residual(u: Field, v: Field, params: ModelParams) -> float:
    """Sum of discrete equation residuals over hole-boundary nodes for the
    displacement solve; a natural-boundary sanity check that should sit at
    linear-solver tolerance."""
    from .geometry import HOLE
    mesh = u.mesh
    coeff = fem.CoefficientSpec(
        scalar_field=Field(mesh, v.values**2 + params.eta))
    k = fem.assemble_stiffness(mesh, coeff)
    r = k @ u.values
    hole_nodes = mesh.boundary_nodes(HOLE)
    if hole_nodes.size == 0:
        return 0.0
    return float(np.abs(r[hole_nodes]).sum())
