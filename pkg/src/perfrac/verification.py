"""Manufactured-solution verification of the elliptic solve path."""

from __future__ import annotations

import math

import numpy as np

from . import fem
from .geometry import MacroDomain, build_macro_mesh


def solve_manufactured_problem(n: int, tol=1e-12):
    """Solve -Laplace(u) = 2 pi^2 sin(pi x) sin(pi y) on the unit square
    with zero Dirichlet data and return (h, L2 error against the exact
    solution's interpolant)."""
    mesh = build_macro_mesh(MacroDomain(resolution=n))
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    exact = np.sin(math.pi * x) * np.sin(math.pi * y)
    f = 2.0 * math.pi**2 * exact
    k = fem.assemble_stiffness(mesh, 1.0)
    rhs = mesh.lumped_mass * f
    op, rhs = fem.apply_dirichlet(mesh, k, rhs, np.zeros(mesh.num_nodes))
    u = fem.solve_spd(op, rhs, tol=tol)
    return 1.0 / n, fem.l2_norm(mesh, u - exact)


def convergence_table(resolutions):
    """Rows (n, h, error, rate) with the observed rate between consecutive
    resolutions; the first row's rate is reported as nan."""
    rows = []
    prev = None
    for n in resolutions:
        h, err = solve_manufactured_problem(n)
        rate = math.nan
        if prev is not None:
            rate = math.log(prev[1] / err) / math.log(prev[0] / h)
        rows.append((n, h, err, rate))
        prev = (h, err)
    return rows
