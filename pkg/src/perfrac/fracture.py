"""Quasi-static evolution of the regularized fracture model with a constant
effective tensor weighting all gradients.

The model is evolved by alternate minimization at each pseudo-time step:
the displacement subproblem is a weighted anisotropic Laplace solve with the
current boundary datum, the damage subproblem a box-constrained quadratic
minimization whose upper bound is the previous step's damage field (hard
irreversibility, no history-field surrogate). Both subproblems minimize the
same discrete total energy, so the energy is nonincreasing across every
half-step; the evolution tracks that certificate together with the discrete
energy-balance residual against trapezoidal load work.

The fine-scale reference model reuses everything here with the identity
tensor on a perforated mesh.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import fem
from .cell import HomogTensor
from .errors import NoConvergence, ValidationError
from .fem import Field
from .geometry import Mesh, OUTER
from .loads import LoadProgram

log = logging.getLogger("perfrac")


@dataclass(frozen=True)
class ModelParams:
    """Regularization and solver parameters of one evolution run."""

    tensor: HomogTensor
    gamma: float = 0.1
    eta: float = 1e-5
    steps: int = 50
    altmin_tol: float = 1e-6
    altmin_max_iters: int = 100
    cg_tol: float = 1e-10
    kkt_tol: float = 1e-6

    def __post_init__(self):
        if not (0.0 < self.eta < self.gamma):
            raise ValidationError("need 0 < eta < gamma",
                                  eta=self.eta, gamma=self.gamma)
        if self.steps < 1:
            raise ValidationError("need at least one pseudo-time step")
        if self.altmin_max_iters < 1:
            raise ValidationError("need at least one alternate-minimization "
                                  "iteration")

    @property
    def m0(self) -> np.ndarray:
        return self.tensor.tensor


@dataclass(frozen=True)
class StepRecord:
    step: int
    s: float
    elastic: float
    surface: float
    total: float
    work_accum: float
    balance_residual: float
    altmin_iters: int
    min_v: float


@dataclass
class Trajectory:
    """Per-step energy bookkeeping plus the final fields and the run-wide
    certificates (largest nodal damage increase, largest relative energy
    increase over a half-step)."""

    records: list[StepRecord]
    final_u: Field
    final_v: Field
    v_increase_max: float = 0.0
    energy_increase_max: float = 0.0
    fields: list = field(default_factory=list)   # (step, u, v) snapshots


def energy_elastic(u: Field, v: Field, params: ModelParams) -> float:
    """Stored elastic energy 1/2 int (v^2 + eta) (M grad u) . grad u."""
    return fem.elastic_energy(u.mesh, u, v, params.eta, params.m0)


def energy_surface(v: Field, params: ModelParams) -> float:
    """Regularized surface energy int (1-v)^2/(4 gamma) + gamma (M grad v) . grad v."""
    return fem.damage_energy(v.mesh, v, params.gamma, params.m0)


def minimize_u(mesh: Mesh, v: Field, load: LoadProgram, s: float,
               params: ModelParams) -> Field:
    """Exact minimization in the displacement: weighted anisotropic Laplace
    solve with coefficient (v^2 + eta) M and Dirichlet trace g(., s)."""
    coeff = fem.CoefficientSpec(matrix=params.m0,
                                scalar_field=Field(mesh, v.values**2 + params.eta))
    k = fem.assemble_stiffness(mesh, coeff)
    g = load.g(mesh.nodes, s)
    op, rhs = fem.apply_dirichlet(mesh, k, np.zeros(mesh.num_nodes), g, OUTER)
    return Field(mesh, fem.solve_spd(op, rhs, tol=params.cg_tol))


def _damage_system(mesh: Mesh, u: Field, params: ModelParams):
    """Hessian and linear term of the damage subproblem.

    The driving term int z^2 (M grad u . grad u) under the vertex-mean rule
    is a |grad u|^2-weighted lumped mass, so the Hessian is
    diag(w) + (1/(2 gamma)) M_lumped + 2 gamma K_M and the linear term
    m_lumped/(2 gamma).
    """
    gu = fem.element_gradients(mesh, u.values)
    drive = np.einsum("ei,ij,ej->e", gu, params.m0, gu)
    w = np.zeros(mesh.num_nodes)
    np.add.at(w, mesh.triangles.ravel(),
              np.repeat(mesh.areas * drive / 3.0, 3))
    k = fem.assemble_stiffness(mesh, params.m0)
    lumped = mesh.lumped_mass
    hess = (sp.diags(w + lumped / (2.0 * params.gamma))
            + 2.0 * params.gamma * k).tocsr()
    rhs = lumped / (2.0 * params.gamma)
    return hess, rhs


def minimize_v(u: Field, v_bound: Field, params: ModelParams,
               v_start: Field | None = None) -> Field:
    """Exact minimization in the damage variable over 0 <= z <= v_bound.

    At interior nodes the converged iterate satisfies the discrete
    stationarity -2 gamma div(M grad v) + v (M grad u . grad u) = (1-v)/(2 gamma)
    up to the KKT tolerance; nodes pinned at the bound keep the admissible
    residual sign. ``v_start`` warm-starts the sweeps (it is clipped into
    the box, so the objective still decreases monotonically from there).
    """
    mesh = u.mesh
    hess, rhs = _damage_system(mesh, u, params)
    x0 = (v_start if v_start is not None else v_bound).values
    z = fem.solve_box_constrained(hess, rhs, 0.0, v_bound.values,
                                  tol=params.kkt_tol, x0=x0,
                                  xtol=0.1 * params.altmin_tol)
    return Field(mesh, z)


def damage_kkt_violation(u: Field, v: Field, v_bound: Field,
                         params: ModelParams) -> float:
    """Optimality violation of a damage iterate (diagnostic for tests)."""
    hess, rhs = _damage_system(u.mesh, u, params)
    return fem.kkt_violation(hess, rhs, v.values,
                             np.zeros(u.mesh.num_nodes), v_bound.values)


def alternate_minimize(mesh: Mesh, load: LoadProgram, s: float,
                       v_bound: Field, params: ModelParams,
                       v_start: Field | None = None):
    """Alternate exact minimizations in u and v at fixed pseudo-time.

    Returns (u, v, iterations, energy_increase_max) where the last entry is
    the largest relative total-energy increase observed across half-steps
    (mathematically nonpositive up to solver tolerance).
    """
    v = v_start if v_start is not None else v_bound
    total_prev = None
    worst = 0.0
    for it in range(1, params.altmin_max_iters + 1):
        u = minimize_u(mesh, v, load, s, params)
        total = energy_elastic(u, v, params) + energy_surface(v, params)
        worst = _track_increase(worst, total_prev, total)
        v_new = minimize_v(u, v_bound, params, v_start=v)
        total_new = energy_elastic(u, v_new, params) \
            + energy_surface(v_new, params)
        worst = _track_increase(worst, total, total_new)
        delta = float(np.abs(v_new.values - v.values).max())
        v, total_prev = v_new, total_new
        if delta <= params.altmin_tol:
            return u, v, it, worst
    raise NoConvergence("alternate minimization hit the iteration cap",
                        iterations=params.altmin_max_iters, s=s,
                        last_change=delta, oscillating=delta > params.altmin_tol)


def _track_increase(worst, before, after):
    if before is None:
        return worst
    scale = max(abs(before), abs(after), 1e-300)
    return max(worst, (after - before) / scale)


def evolve(mesh: Mesh, load: LoadProgram, params: ModelParams,
           v_init: Field | None = None, freeze_v: bool = False,
           field_stride: int = 0) -> Trajectory:
    """Evolve the model over the uniform pseudo-time grid s_k = k/N.

    Each step minimizes alternately with the damage bounded above by the
    previous step's field (irreversibility); load work accumulates by the
    trapezoid rule on int (eta + v^2) (M grad u) . grad(dg/ds) and the
    balance residual is total energy minus initial energy minus work.

    ``freeze_v`` skips the damage solve entirely (pure elastic evolution);
    ``field_stride`` > 0 stores (step, u, v) snapshots every that many steps.
    """
    n_steps = params.steps
    v = v_init if v_init is not None else Field.constant(mesh, 1.0)
    if (v.values < 0.0).any() or (v.values > 1.0).any():
        raise ValidationError("initial damage field must lie in [0, 1]")
    if mesh.h_max >= params.gamma / 4.0:
        log.warning(
            "mesh size %.3g does not resolve the regularization length "
            "%.3g (want h < gamma/4); damage bands will be mesh-sensitive",
            mesh.h_max, params.gamma)

    # The minimality conditions hold at every pseudo-time including s = 0,
    # so a raw initial field (a nodal notch, say) is first relaxed to a
    # critical point under its own bound; the balance then references an
    # admissible state.
    if freeze_v:
        u = minimize_u(mesh, v, load, 0.0, params)
    else:
        u, v, _, _ = alternate_minimize(mesh, load, 0.0, v_bound=v,
                                        params=params)
    e0 = energy_elastic(u, v, params)
    h0 = energy_surface(v, params)
    total_init = e0 + h0
    rate_prev = fem.load_work_rate(mesh, u, v, params.eta, params.m0,
                                   load.g_rate(mesh.nodes, 0.0))
    work = 0.0
    records = [StepRecord(0, 0.0, e0, h0, total_init, 0.0, 0.0, 0,
                          float(v.values.min()))]
    traj = Trajectory(records, u, v)
    if field_stride > 0:
        traj.fields.append((0, u, v))

    ds = 1.0 / n_steps
    for k in range(1, n_steps + 1):
        s = k / n_steps
        if freeze_v:
            u = minimize_u(mesh, v, load, s, params)
            v_new, iters = v, 1
        else:
            u, v_new, iters, energy_gap = alternate_minimize(
                mesh, load, s, v_bound=v, params=params)
            traj.energy_increase_max = max(traj.energy_increase_max,
                                           energy_gap)
        increase = float((v_new.values - v.values).max())
        traj.v_increase_max = max(traj.v_increase_max, increase)
        if increase > 1e-12:
            raise NoConvergence("irreversibility violated by the damage "
                                "solve", step=k, increase=increase)
        v = v_new

        rate = fem.load_work_rate(mesh, u, v, params.eta, params.m0,
                                  load.g_rate(mesh.nodes, s))
        work += 0.5 * ds * (rate_prev + rate)
        rate_prev = rate

        e0 = energy_elastic(u, v, params)
        h0 = energy_surface(v, params)
        residual = (e0 + h0) - total_init - work
        records.append(StepRecord(k, s, e0, h0, e0 + h0, work, residual,
                                  iters, float(v.values.min())))
        if field_stride > 0 and (k % field_stride == 0 or k == n_steps):
            traj.fields.append((k, u, v))

    traj.final_u, traj.final_v = u, v
    return traj


def notch_field(mesh: Mesh, segment, width: float | None = None) -> Field:
    """Initial damage field with v = 0 on nodes within ``width`` of the
    segment ((x0, y0), (x1, y1)); default width is half a mesh cell."""
    (x0, y0), (x1, y1) = segment
    a = np.array([x0, y0])
    b = np.array([x1, y1])
    ab = b - a
    denom = float(ab @ ab)
    rel = mesh.nodes - a
    t = np.clip((rel @ ab) / denom, 0.0, 1.0) if denom > 0 else 0.0
    closest = a + np.outer(t, ab) if denom > 0 else np.broadcast_to(a, mesh.nodes.shape)
    dist = np.linalg.norm(mesh.nodes - closest, axis=1)
    w = width if width is not None else 0.51 * mesh.h_max
    values = np.ones(mesh.num_nodes)
    values[dist <= w] = 0.0
    return Field(mesh, values)
