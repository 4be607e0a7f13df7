"""Command-line driver: configuration, mode dispatch, file artifacts.

Every run writes a manifest with the fully resolved configuration beside
its outputs; numeric outputs are deterministic for a fixed config.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

from . import finescale, fracture, report, verification
from .cell import HomogTensor, homogenized_tensor, solve_cell_problems
from .config import MODES, RunConfig, parse_config, validate_config
from .errors import PerfracError, ValidationError
from .fracture import ModelParams, notch_field
from .geometry import CellGeometry, MacroDomain, build_macro_mesh, \
    build_perforated_mesh, build_unit_cell_mesh
from .loads import make_load
from .vtk_io import write_vtk

log = logging.getLogger("perfrac")

ENERGY_COLUMNS = ("step", "s", "E0", "H0", "total", "work_accum",
                  "balance_residual", "altmin_iters", "min_v")
VALIDATION_COLUMNS = ("epsilon", "relL2_u", "relL2_u_corrected",
                      "relH1semi_u", "relH1semi_u_corrected", "relL2_v")

_EXIT_CODES = {
    "PARSE_ERROR": 2, "VALIDATION_ERROR": 3, "INVALID_RADIUS": 4,
    "MESH_DEGENERATE": 5, "TILING_MISMATCH": 6, "MESH_MISMATCH": 7,
    "SINGULAR_SYSTEM": 8, "NO_CONVERGENCE": 9, "INFEASIBLE_BOUNDS": 10,
    "IDENTITY_VIOLATION": 11, "POINT_OUTSIDE_DOMAIN": 12,
}


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("PERFRAC_THREADS", "1")))
    except ValueError:
        return 1


def _model_params(cfg: RunConfig, tensor) -> ModelParams:
    return ModelParams(tensor=tensor, gamma=cfg.gamma, eta=cfg.eta,
                       steps=cfg.steps, altmin_tol=cfg.altmin_tol,
                       altmin_max_iters=cfg.altmin_max_iters,
                       cg_tol=cfg.cg_tol, kkt_tol=cfg.kkt_tol)


def _macro_domain(cfg: RunConfig) -> MacroDomain:
    return MacroDomain(cfg.ax, cfg.bx, cfg.ay, cfg.by, cfg.macro_n)


def _cell_tensor(cfg: RunConfig):
    geom = CellGeometry(cfg.r, cfg.n)
    mesh = build_unit_cell_mesh(geom)
    basis = solve_cell_problems(mesh, tol=cfg.cg_tol)
    return geom, basis, homogenized_tensor(basis)


def _v_init(cfg: RunConfig, mesh):
    if cfg.notch:
        x0, y0, x1, y1 = cfg.notch
        return notch_field(mesh, ((x0, y0), (x1, y1)))
    return None


def _energy_rows(traj):
    return [(r.step, r.s, r.elastic, r.surface, r.total, r.work_accum,
             r.balance_residual, r.altmin_iters, r.min_v)
            for r in traj.records]


def _write_field_snapshots(outdir, traj, prefix):
    for step, u, v in traj.fields:
        write_vtk(u.mesh, os.path.join(outdir, f"{prefix}_{step:04d}.vtk"),
                  {"u": u.values, "v": v.values})


# ---------------------------------------------------------------------------
# modes
# ---------------------------------------------------------------------------

def run_cell(cfg: RunConfig, outdir: str):
    _, basis, tensor = _cell_tensor(cfg)
    m = tensor.tensor
    report.write_csv(
        os.path.join(outdir, "m0.csv"),
        ("r", "n", "cell_volume", "m0_11", "m0_12", "m0_21", "m0_22",
         "identity_residual"),
        [(cfg.r, cfg.n, tensor.cell_volume, m[0, 0], m[0, 1], m[1, 0],
          m[1, 1], tensor.identity_residual)])
    write_vtk(basis.mesh, os.path.join(outdir, "correctors.vtk"),
              {"z1": basis.z[0].values, "z2": basis.z[1].values})
    if cfg.figures:
        report.field_figure(basis.mesh, basis.z[0].values,
                            os.path.join(outdir, "corrector_z1.png"), "z1")
    log.info("effective tensor diag (%.6g, %.6g), |Y| = %.6g, "
             "identity residual %.2e", m[0, 0], m[1, 1],
             tensor.cell_volume, tensor.identity_residual)


def _run_evolution(cfg: RunConfig, outdir: str, mesh, tensor, prefix: str):
    params = _model_params(cfg, tensor)
    load = make_load(cfg.program, cfg.amplitude, cfg.offset)
    traj = fracture.evolve(mesh, load, params, v_init=_v_init(cfg, mesh),
                           freeze_v=cfg.freeze_v,
                           field_stride=cfg.vtk_stride)
    report.write_csv(os.path.join(outdir, "energy.csv"), ENERGY_COLUMNS,
                     _energy_rows(traj))
    _write_field_snapshots(outdir, traj, prefix)
    if cfg.figures:
        report.energy_figure(traj.records,
                             os.path.join(outdir, "energy.png"))
        report.field_figure(mesh, traj.final_v.values,
                            os.path.join(outdir, "damage_final.png"),
                            "v at s = 1")
    last = traj.records[-1]
    log.info("%s finished: total energy %.6g, balance residual %.3e, "
             "min v %.4f", prefix, last.total, last.balance_residual,
             last.min_v)
    return traj


def run_homog(cfg: RunConfig, outdir: str):
    _, _, tensor = _cell_tensor(cfg)
    mesh = build_macro_mesh(_macro_domain(cfg))
    _run_evolution(cfg, outdir, mesh, tensor, "homog")


def run_fine(cfg: RunConfig, outdir: str):
    geom = CellGeometry(cfg.r, cfg.n)
    mesh = build_perforated_mesh(_macro_domain(cfg), cfg.epsilon, geom)
    _run_evolution(cfg, outdir, mesh, HomogTensor.identity(), "fine")


def run_validate(cfg: RunConfig, outdir: str):
    geom, basis, tensor = _cell_tensor(cfg)
    dom = _macro_domain(cfg)
    macro_mesh = build_macro_mesh(dom)
    params = _model_params(cfg, tensor)
    load = make_load(cfg.program, cfg.amplitude, cfg.offset)
    homog_traj = fracture.evolve(macro_mesh, load, params,
                                 freeze_v=cfg.freeze_v)

    def one_level(eps):
        traj = finescale.fine_evolve(load, params, eps, geom, dom,
                                     freeze_v=cfg.freeze_v)
        state = finescale.FineState.from_trajectory(traj)
        return finescale.compare_to_homog(state, homog_traj.final_u,
                                          homog_traj.final_v, basis, eps)

    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(one_level, cfg.epsilons))
    else:
        reports = [one_level(eps) for eps in cfg.epsilons]

    rows = [(r.epsilon, r.rel_l2_u, r.rel_l2_u_corrected, r.rel_h1_u,
             r.rel_h1_u_corrected, r.rel_l2_v) for r in reports]
    report.write_csv(os.path.join(outdir, "validation.csv"),
                     VALIDATION_COLUMNS, rows)
    if cfg.figures:
        report.validation_figure(reports,
                                 os.path.join(outdir, "validation.png"))
    for r in reports:
        log.info("epsilon %.5g: relL2(u) %.4e, corrected H1 %.4e",
                 r.epsilon, r.rel_l2_u, r.rel_h1_u_corrected)


def run_mms(cfg: RunConfig, outdir: str):
    rows = verification.convergence_table(cfg.mms_resolutions)
    report.write_csv(os.path.join(outdir, "mms.csv"),
                     ("n", "h", "l2_error", "rate"), rows)
    if cfg.figures:
        report.mms_figure(rows, os.path.join(outdir, "mms.png"))
    for n, h, err, rate in rows:
        log.info("n=%3d  h=%.4g  error=%.4e  rate=%.3f", n, h, err, rate)


_DISPATCH = {
    "cell": run_cell,
    "homog-run": run_homog,
    "fine-run": run_fine,
    "validate": run_validate,
    "mms": run_mms,
}


def run_config(cfg: RunConfig) -> int:
    """Dispatch one fully resolved configuration; returns the exit status."""
    validate_config(cfg)
    if cfg.mode not in MODES:
        raise ValidationError("run.mode must be one of the known modes",
                              mode=cfg.mode, known=MODES)
    outdir = cfg.out
    os.makedirs(outdir, exist_ok=True)
    report.write_manifest(outdir, cfg)
    _DISPATCH[cfg.mode](cfg, outdir)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="perfrac",
        description="Homogenized and fine-scale quasi-static fracture in "
                    "periodically perforated media.")
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", help="flat key-value config file")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress progress output")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(message)s")

    try:
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                cfg = parse_config(fh.read())
        else:
            cfg = RunConfig()
        cfg = replace(cfg, mode=args.mode)
        if args.out:
            cfg = replace(cfg, out=args.out)
        return run_config(cfg)
    except PerfracError as err:
        print(f"perfrac: error [{err.code}]: {err}", file=sys.stderr)
        return _EXIT_CODES.get(err.code, 1)
    except OSError as err:
        print(f"perfrac: error [IO_ERROR]: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
