"""Quasi-static phase-field fracture in periodically perforated media.

The package splits into the discrete domains (``geometry``), shared P1
finite-element machinery (``fem``), the periodic cell problems and effective
tensor (``cell``), the homogenized fracture evolution (``fracture``), the
fine-scale reference model (``finescale``) and the configuration/CLI harness
(``config``, ``cli``, ``report``).
"""

from .cell import (CorrectorBasis, HomogTensor, homogenized_tensor,
                   reconstruct_corrector, solve_cell_problems)
from .config import RunConfig, parse_config, serialize_config
from .errors import PerfracError
from .fem import CoefficientSpec, Field
from .finescale import ErrorReport, FineState, compare_to_homog, \
    fine_energies, fine_evolve
from .fracture import (ModelParams, StepRecord, Trajectory,
                       alternate_minimize, energy_elastic, energy_surface,
                       evolve, minimize_u, minimize_v, notch_field)
from .geometry import (CELL, HOLE, MACRO, OUTER, PERFORATED, CellGeometry,
                       MacroDomain, Mesh, build_macro_mesh,
                       build_perforated_mesh, build_unit_cell_mesh)
from .loads import BUILTIN_LOADS, LoadProgram, make_load
from .vtk_io import write_vtk

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_LOADS", "CELL", "CoefficientSpec", "CorrectorBasis",
    "CellGeometry", "ErrorReport", "Field", "FineState", "HOLE",
    "HomogTensor", "LoadProgram", "MACRO", "MacroDomain", "Mesh",
    "ModelParams", "OUTER", "PERFORATED", "PerfracError", "RunConfig",
    "StepRecord", "Trajectory", "alternate_minimize", "build_macro_mesh",
    "build_perforated_mesh", "build_unit_cell_mesh", "compare_to_homog",
    "energy_elastic", "energy_surface", "evolve", "fine_energies",
    "fine_evolve", "homogenized_tensor", "make_load", "minimize_u",
    "minimize_v", "notch_field", "parse_config", "reconstruct_corrector",
    "serialize_config", "solve_cell_problems", "write_vtk",
]
