"""Discrete domains: the perforated unit cell, the macroscopic rectangle, and
the periodically perforated rectangle.

All meshes are conforming P1 triangulations built from a structured grid.
Each grid square is split into two triangles along a diagonal chosen by the
parity of its integer coordinates; for even resolutions this makes the mesh
invariant under both axis mirrors (so computed effective tensors inherit the
symmetry of a centered circular hole) and makes a tiled cell grid coincide
with a directly built grid of the same total resolution.

Holes are carved by removing triangles whose centroid falls inside the disk
and projecting the nodes of the resulting jagged boundary radially onto the
circle. Opposite frame edges of the unit cell stay identically discretized,
which is what the periodic node pairing relies on.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np

from .errors import InvalidRadius, MeshDegenerate, TilingMismatch

# region tags
CELL = "cell"
MACRO = "macro"
PERFORATED = "perforated"

# boundary tags
OUTER = "outer"
HOLE = "hole"

_FRAME_TOL = 1e-12
_PAIR_TOL = 1e-10


@dataclass(frozen=True)
class CellGeometry:
    """Unit cell (0,1)^2 with a centered circular hole of radius ``r``.

    ``n`` is the number of grid segments per unit edge. The hole center is
    fixed at (1/2, 1/2); ``r`` must satisfy 0 <= r < 1/2 so the closed disk
    stays inside the open square.
    """

    r: float
    n: int

    hole_center = (0.5, 0.5)

    def __post_init__(self):
        if not (0.0 <= self.r < 0.5):
            raise InvalidRadius("hole radius must satisfy 0 <= r < 1/2", r=self.r)
        if self.n < 4:
            raise MeshDegenerate("cell resolution must be at least 4", n=self.n)

    @property
    def cell_volume(self) -> float:
        """Analytic |Y| = 1 - pi r^2 (positive for admissible r)."""
        return 1.0 - math.pi * self.r**2


@dataclass(frozen=True)
class MacroDomain:
    """Axis-aligned rectangle (ax, bx) x (ay, by) with ``resolution`` segments
    along the x side; the y side gets a proportional count so grid cells stay
    near square."""

    ax: float = 0.0
    bx: float = 1.0
    ay: float = 0.0
    by: float = 1.0
    resolution: int = 16

    def __post_init__(self):
        if not (self.bx > self.ax and self.by > self.ay):
            raise MeshDegenerate(
                "macro domain must have positive side lengths",
                extents=(self.ax, self.bx, self.ay, self.by),
            )
        if self.resolution < 1:
            raise MeshDegenerate("macro resolution must be at least 1")

    @property
    def side_lengths(self):
        return self.bx - self.ax, self.by - self.ay


class Mesh:
    """Immutable planar triangulation with tagged boundary and optional
    periodic node identifications.

    Attributes
    ----------
    nodes : (n, 2) float array
    triangles : (m, 3) int array, counterclockwise
    boundary_edges : (k, 2) int array, each edge on exactly one triangle
    boundary_tags : (k,) array of {OUTER, HOLE}
    periodic_pairs : (p, 2) int array of (master, slave) identifications
    region : one of {CELL, MACRO, PERFORATED}
    """

    def __init__(self, nodes, triangles, boundary_edges, boundary_tags,
                 periodic_pairs, region):
        self.nodes = np.ascontiguousarray(nodes, dtype=np.float64)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        self.boundary_edges = np.ascontiguousarray(boundary_edges, dtype=np.int64)
        self.boundary_tags = np.asarray(boundary_tags, dtype=object)
        self.periodic_pairs = np.ascontiguousarray(
            periodic_pairs, dtype=np.int64).reshape(-1, 2)
        self.region = region
        for arr in (self.nodes, self.triangles, self.boundary_edges,
                    self.periodic_pairs):
            arr.setflags(write=False)
        self._validate()

    # -- size helpers -------------------------------------------------
    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    # -- geometric caches ----------------------------------------------
    @cached_property
    def areas(self):
        """Signed triangle areas; all strictly positive by construction."""
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def grads(self):
        """P1 basis gradients, shape (m, 2, 3): grads[e, :, i] = grad(phi_i)."""
        p = self.nodes[self.triangles]
        g = np.empty((self.num_triangles, 2, 3))
        for i in range(3):
            a, b = p[:, (i + 1) % 3], p[:, (i + 2) % 3]
            g[:, 0, i] = a[:, 1] - b[:, 1]
            g[:, 1, i] = b[:, 0] - a[:, 0]
        g /= (2.0 * self.areas)[:, None, None]
        return g

    @cached_property
    def lumped_mass(self):
        """Vertex-quadrature mass: m_i = sum of incident areas / 3."""
        m = np.zeros(self.num_nodes)
        np.add.at(m, self.triangles.ravel(),
                  np.repeat(self.areas / 3.0, 3))
        return m

    @cached_property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @cached_property
    def h_max(self) -> float:
        p = self.nodes[self.triangles]
        e = np.concatenate([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1],
                            p[:, 0] - p[:, 2]])
        return float(np.sqrt((e**2).sum(axis=1)).max())

    def boundary_nodes(self, tag) -> np.ndarray:
        """Sorted unique node indices on boundary edges carrying ``tag``."""
        sel = self.boundary_tags == tag
        return np.unique(self.boundary_edges[sel])

    # -- validation -----------------------------------------------------
    def _validate(self):
        if self.num_triangles == 0:
            raise MeshDegenerate("mesh has no triangles")
        if self.areas.min() <= 0.0:
            raise MeshDegenerate("non-positive triangle area",
                                 min_area=float(self.areas.min()))
        edges = np.concatenate([self.triangles[:, [0, 1]],
                                self.triangles[:, [1, 2]],
                                self.triangles[:, [2, 0]]])
        key = np.sort(edges, axis=1)
        _, inverse, counts = np.unique(key, axis=0, return_inverse=True,
                                       return_counts=True)
        if counts.max() > 2:
            raise MeshDegenerate("edge shared by more than two triangles")
        n_open = int((counts == 1).sum())
        if n_open != self.boundary_edges.shape[0]:
            raise MeshDegenerate(
                "boundary edge list inconsistent with triangulation",
                open_edges=n_open, tagged=self.boundary_edges.shape[0])


# ---------------------------------------------------------------------------
# structured grid and hole carving
# ---------------------------------------------------------------------------

def _structured_grid(nx, ny, xs, ys):
    """Grid nodes and parity-checkerboard triangles over xs x ys lines."""
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    k = 0
    for j in range(ny):
        for i in range(nx):
            n00, n10 = nid(i, j), nid(i + 1, j)
            n01, n11 = nid(i, j + 1), nid(i + 1, j + 1)
            if (i + j) % 2 == 0:
                tris[k] = (n00, n10, n11)
                tris[k + 1] = (n00, n11, n01)
            else:
                tris[k] = (n00, n10, n01)
                tris[k + 1] = (n10, n11, n01)
            k += 2
    return nodes, tris


def _boundary_edges(triangles):
    """Directed boundary edges (in triangle orientation) of a triangle set."""
    edges = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]],
                            triangles[:, [2, 0]]])
    key = np.sort(edges, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True,
                                   return_counts=True)
    return edges[counts[inverse] == 1]


def _on_frame(points, extents, tol=_FRAME_TOL):
    ax, bx, ay, by = extents
    scale = max(bx - ax, by - ay)
    t = tol * max(scale, 1.0)
    return ((np.abs(points[:, 0] - ax) <= t) | (np.abs(points[:, 0] - bx) <= t)
            | (np.abs(points[:, 1] - ay) <= t) | (np.abs(points[:, 1] - by) <= t))


def _carve_holes(nodes, tris, centers_of, radius, extents):
    """Remove triangles whose centroid lies inside a hole and project the
    jagged hole boundary onto the circle(s).

    ``centers_of(points)`` maps points to their governing hole center.
    Returns (nodes, tris, index_map) with compacted node numbering; the map
    sends old node indices to new ones (-1 for dropped nodes).
    """
    centroids = nodes[tris].mean(axis=1)
    dist = np.linalg.norm(centroids - centers_of(centroids), axis=1)
    keep = dist >= radius
    if keep.all():
        raise MeshDegenerate(
            "hole not resolved by the grid: no triangle centroid falls "
            "inside the disk", radius=radius)
    tris = tris[keep]
    frame_node = _on_frame(nodes, extents)

    # Triangles with all three vertices on the jagged hole boundary would
    # collapse onto the circle under projection; peel them off first.
    while True:
        edges = _boundary_edges(tris)
        edge_on_frame = frame_node[edges[:, 0]] & frame_node[edges[:, 1]]
        hole_nodes = np.unique(edges[~edge_on_frame])
        on_hole = np.zeros(nodes.shape[0], dtype=bool)
        on_hole[hole_nodes] = True
        sliver = on_hole[tris].all(axis=1)
        if not sliver.any():
            break
        tris = tris[~sliver]
        if tris.shape[0] == 0:
            raise MeshDegenerate("hole carving removed every triangle",
                                 radius=radius)

    used = np.zeros(nodes.shape[0], dtype=bool)
    used[tris.ravel()] = True

    if frame_node[hole_nodes].any():
        raise MeshDegenerate("hole boundary reaches the outer frame; "
                             "reduce the radius or refine the grid")

    nodes = nodes.copy()
    c = centers_of(nodes[hole_nodes])
    rel = nodes[hole_nodes] - c
    norm = np.linalg.norm(rel, axis=1)
    if (norm == 0.0).any():
        raise MeshDegenerate("hole boundary node coincides with hole center")
    nodes[hole_nodes] = c + radius * rel / norm[:, None]

    # any remaining node strictly inside a hole means the carving failed
    interior = used.copy()
    interior[hole_nodes] = False
    d_all = np.linalg.norm(nodes - centers_of(nodes), axis=1)
    if (d_all[interior] < radius * (1.0 - 1e-12)).any():
        raise MeshDegenerate("node remains strictly inside the hole")

    index_map = np.full(len(used), -1, dtype=np.int64)
    index_map[used] = np.arange(int(used.sum()))
    return nodes[used], index_map[tris], index_map


def _tag_boundary(nodes, tris, extents):
    edges = _boundary_edges(tris)
    frame_node = _on_frame(nodes, extents)
    on_frame = frame_node[edges[:, 0]] & frame_node[edges[:, 1]]
    tags = np.where(on_frame, OUTER, HOLE).astype(object)
    return edges, tags


def _periodic_pairs(nodes, n):
    """Pair every left/bottom frame node with its right/top image.

    Matching is by coordinate offset (1,0) or (0,1) within ``_PAIR_TOL``;
    corner nodes participate in both directions.
    """
    idx = {}
    frame = _on_frame(nodes, (0.0, 1.0, 0.0, 1.0))
    for i in np.flatnonzero(frame):
        key = (round(nodes[i, 0] * n), round(nodes[i, 1] * n))
        idx[key] = i
    pairs = []
    for (ki, kj), i in sorted(idx.items()):
        if ki == 0:
            j = idx.get((n, kj))
            if j is None or not np.allclose(
                    nodes[j] - nodes[i], (1.0, 0.0), rtol=0, atol=_PAIR_TOL):
                raise MeshDegenerate("left/right frame discretization mismatch")
            pairs.append((i, j))
        if kj == 0:
            j = idx.get((ki, n))
            if j is None or not np.allclose(
                    nodes[j] - nodes[i], (0.0, 1.0), rtol=0, atol=_PAIR_TOL):
                raise MeshDegenerate("bottom/top frame discretization mismatch")
            pairs.append((i, j))
    return np.array(pairs, dtype=np.int64)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_unit_cell_mesh(geom: CellGeometry) -> Mesh:
    """Mesh of Y = (0,1)^2 minus the centered disk of radius ``geom.r``.

    Opposite frame edges share an identical discretization, so the periodic
    pairing is total over frame nodes. The HOLE tag is present iff r > 0.
    """
    n = geom.n
    xs = np.linspace(0.0, 1.0, n + 1)
    nodes, tris = _structured_grid(n, n, xs, xs)
    extents = (0.0, 1.0, 0.0, 1.0)

    if geom.r > 0.0:
        center = np.array(geom.hole_center)
        nodes, tris, _ = _carve_holes(
            nodes, tris, lambda p: np.broadcast_to(center, p.shape),
            geom.r, extents)

    edges, tags = _tag_boundary(nodes, tris, extents)
    pairs = _periodic_pairs(nodes, n)
    return Mesh(nodes, tris, edges, tags, pairs, CELL)


def build_macro_mesh(dom: MacroDomain) -> Mesh:
    """Structured triangulation of the macroscopic rectangle; all boundary
    edges are OUTER and there are no periodic pairs."""
    lx, ly = dom.side_lengths
    nx = dom.resolution
    ny = max(1, round(nx * ly / lx))
    xs = np.linspace(dom.ax, dom.bx, nx + 1)
    ys = np.linspace(dom.ay, dom.by, ny + 1)
    nodes, tris = _structured_grid(nx, ny, xs, ys)
    extents = (dom.ax, dom.bx, dom.ay, dom.by)
    edges, tags = _tag_boundary(nodes, tris, extents)
    return Mesh(nodes, tris, edges, tags, np.empty((0, 2)), MACRO)


def build_perforated_mesh(dom: MacroDomain, epsilon: float,
                          geom: CellGeometry) -> Mesh:
    """Rectangle tiled by epsilon-scaled copies of the holed unit cell.

    The scaling must tile both side lengths exactly; hole boundaries are
    tagged HOLE, the outer boundary OUTER, and there are no periodic pairs.
    """
    if epsilon <= 0:
        raise TilingMismatch("epsilon must be positive", epsilon=epsilon)
    lx, ly = dom.side_lengths
    mx, my = lx / epsilon, ly / epsilon
    if abs(mx - round(mx)) > 1e-9 * max(1.0, mx) or \
       abs(my - round(my)) > 1e-9 * max(1.0, my):
        raise TilingMismatch(
            "epsilon does not evenly tile the domain",
            epsilon=epsilon, tiles_x=mx, tiles_y=my)
    mx, my = int(round(mx)), int(round(my))

    n = geom.n
    xs = np.linspace(dom.ax, dom.bx, mx * n + 1)
    ys = np.linspace(dom.ay, dom.by, my * n + 1)
    nodes, tris = _structured_grid(mx * n, my * n, xs, ys)
    extents = (dom.ax, dom.bx, dom.ay, dom.by)

    if geom.r > 0.0:
        origin = np.array([dom.ax, dom.ay])

        def centers_of(points):
            t = np.floor((points - origin) / epsilon)
            t[:, 0] = np.clip(t[:, 0], 0, mx - 1)
            t[:, 1] = np.clip(t[:, 1], 0, my - 1)
            return origin + (t + 0.5) * epsilon

        nodes, tris, _ = _carve_holes(nodes, tris, centers_of,
                                      epsilon * geom.r, extents)

    edges, tags = _tag_boundary(nodes, tris, extents)
    return Mesh(nodes, tris, edges, tags, np.empty((0, 2)), PERFORATED)


# ---------------------------------------------------------------------------
# point location and interpolation
# ---------------------------------------------------------------------------

class PointLocator:
    """Uniform-bin point-in-triangle lookup for a fixed mesh."""

    def __init__(self, mesh: Mesh, bins: int | None = None):
        self.mesh = mesh
        lo = mesh.nodes.min(axis=0)
        hi = mesh.nodes.max(axis=0)
        span = np.maximum(hi - lo, 1e-300)
        nb = bins or max(4, int(math.sqrt(mesh.num_triangles / 2.0)))
        self._lo, self._span, self._nb = lo, span, nb
        self._bins = [[] for _ in range(nb * nb)]
        p = mesh.nodes[mesh.triangles]
        bmin = self._bin_index(p.min(axis=1))
        bmax = self._bin_index(p.max(axis=1))
        for t in range(mesh.num_triangles):
            for bi in range(bmin[t, 0], bmax[t, 0] + 1):
                for bj in range(bmin[t, 1], bmax[t, 1] + 1):
                    self._bins[bj * nb + bi].append(t)

    def _bin_index(self, pts):
        ij = ((pts - self._lo) / self._span * self._nb).astype(np.int64)
        return np.clip(ij, 0, self._nb - 1)

    def locate(self, points, tol=1e-9):
        """Containing triangle and barycentric coordinates per point.

        Returns (elements, bary) with element -1 where no triangle contains
        the point within ``tol`` (relative to barycentric range).
        """
        points = np.atleast_2d(points)
        elems = np.full(points.shape[0], -1, dtype=np.int64)
        bary = np.zeros((points.shape[0], 3))
        nodes, tris = self.mesh.nodes, self.mesh.triangles
        ij = self._bin_index(points)
        for k, pt in enumerate(points):
            best, best_b, best_min = -1, None, -np.inf
            for t in self._bins[ij[k, 1] * self._nb + ij[k, 0]]:
                p0, p1, p2 = nodes[tris[t]]
                d = (p1[0] - p0[0]) * (p2[1] - p0[1]) - \
                    (p2[0] - p0[0]) * (p1[1] - p0[1])
                a = ((pt[0] - p0[0]) * (p2[1] - p0[1])
                     - (p2[0] - p0[0]) * (pt[1] - p0[1])) / d
                b = ((p1[0] - p0[0]) * (pt[1] - p0[1])
                     - (pt[0] - p0[0]) * (p1[1] - p0[1])) / d
                bb = (1.0 - a - b, a, b)
                m = min(bb)
                if m > best_min:
                    best, best_b, best_min = t, bb, m
                if m >= -tol:
                    break
            if best >= 0 and best_min >= -tol:
                elems[k] = best
                bary[k] = best_b
        return elems, bary
