"""Delimited output and the figures rendered next to it.

CSV files use '.' decimals, ',' separators, LF line endings and 17
significant digits, so regression diffs are bit-exact. Every figure is a
plain matplotlib render of the adjacent CSV's content.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import matplotlib.tri as mtri

from .config import RunConfig, serialize_config


def fmt(value) -> str:
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    return format(float(value), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_manifest(outdir, cfg: RunConfig):
    path = os.path.join(outdir, "manifest.cfg")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_config(cfg))
    return path


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------

def energy_figure(records, path):
    """Energy components, load work and damage minimum along pseudo-time."""
    s = [r.s for r in records]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax1.plot(s, [r.elastic for r in records], label="elastic")
    ax1.plot(s, [r.surface for r in records], label="surface")
    ax1.plot(s, [r.total for r in records], label="total", lw=2)
    ax1.plot(s, [r.work_accum for r in records], "--", label="work")
    ax1.set_xlabel("s")
    ax1.set_ylabel("energy")
    ax1.legend(fontsize=8)
    ax2.plot(s, [r.min_v for r in records], color="tab:red")
    ax2.set_xlabel("s")
    ax2.set_ylabel("min v")
    ax2.set_ylim(-0.05, 1.05)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def field_figure(mesh, values, path, label):
    tri = mtri.Triangulation(mesh.nodes[:, 0], mesh.nodes[:, 1],
                             mesh.triangles)
    fig, ax = plt.subplots(figsize=(4.8, 4.2))
    im = ax.tripcolor(tri, values, shading="gouraud")
    ax.set_aspect("equal")
    ax.set_title(label)
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def validation_figure(reports, path):
    """Error decay of the homogenized solution against the fine-scale one."""
    eps = [r.epsilon for r in reports]
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ax.loglog(eps, [r.rel_l2_u for r in reports], "o-", label="L2(u)")
    ax.loglog(eps, [r.rel_h1_u for r in reports], "s-", label="H1(u)")
    ax.loglog(eps, [r.rel_h1_u_corrected for r in reports], "s--",
              label="H1(u), corrected")
    ax.set_xlabel("epsilon")
    ax.set_ylabel("relative error")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def mms_figure(rows, path):
    """Manufactured-solution error against mesh size with a second-order
    guide line."""
    h = [row[1] for row in rows]
    err = [row[2] for row in rows]
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ax.loglog(h, err, "o-", label="L2 error")
    guide = [err[0] * (hi / h[0]) ** 2 for hi in h]
    ax.loglog(h, guide, "k--", alpha=0.5, label="h^2")
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
