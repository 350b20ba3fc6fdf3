"""Conforming triangular meshes of the unit square and the unit disk.

Meshes carry the boundary topology (an oriented, closed loop of boundary
edges with the domain on the left) that the trace spaces and the conormal
derivative need.  Only two shapes are generated, deterministically:

* ``square``: the structured grid of [0, 1]^2, each cell cut along its
  south-west/north-east diagonal;
* ``disk``: concentric rings of 6k nodes inside a regular inscribed polygon,
  triangulated by a Delaunay triangulation.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

__all__ = [
    "Mesh",
    "MeshError",
    "ResourceLimitError",
    "generate",
    "refine",
    "boundary_normal",
    "boundary_normals",
    "validate",
    "is_delaunay",
    "write_mesh",
    "read_mesh",
    "max_dofs",
]

DEFAULT_MAX_DOFS = 250_000
MESH_HEADER = "DTNMESH 1"


class MeshError(ValueError):
    """Raised for invalid meshes or invalid mesh requests."""


class ResourceLimitError(RuntimeError):
    """Raised when a request would exceed the configured node cap."""


def max_dofs() -> int:
    """Node cap, overridable through the ``DTN_MAX_DOFS`` environment variable."""
    value = os.environ.get("DTN_MAX_DOFS")
    return int(value) if value else DEFAULT_MAX_DOFS


def _check_cap(n_vertices: int) -> None:
    cap = max_dofs()
    if n_vertices > cap:
        raise ResourceLimitError(
            f"mesh would have {n_vertices} vertices, above the cap of {cap} "
            "(set DTN_MAX_DOFS to raise it)"
        )


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_nodes: np.ndarray
    h: float
    shape: str = "custom"
    _normals: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        edges = self.vertices[self.boundary_edges[:, 1]] - self.vertices[self.boundary_edges[:, 0]]
        lengths = np.hypot(edges[:, 0], edges[:, 1])
        normals = np.column_stack([edges[:, 1], -edges[:, 0]]) / lengths[:, None]
        object.__setattr__(self, "_normals", normals)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_boundary_edges(self) -> int:
        return len(self.boundary_edges)

    @property
    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def area(self) -> float:
        return float(np.sum(self.signed_areas()))

    def edge_lengths(self) -> np.ndarray:
        """Lengths of the boundary edges, in boundary-edge order."""
        d = self.vertices[self.boundary_edges[:, 1]] - self.vertices[self.boundary_edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def edges(self) -> np.ndarray:
        """All unique undirected edges, sorted lexicographically."""
        return _unique_edges(self.triangles)

    def same_as(self, other: "Mesh") -> bool:
        """Bit-exact equality of geometry and topology."""
        return (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
            and np.array_equal(self.boundary_edges, other.boundary_edges)
            and np.array_equal(self.boundary_nodes, other.boundary_nodes)
        )


def _unique_edges(triangles: np.ndarray) -> np.ndarray:
    all_edges = np.vstack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    all_edges.sort(axis=1)
    return np.unique(all_edges, axis=0)


def _max_edge_length(vertices: np.ndarray, triangles: np.ndarray) -> float:
    e = _unique_edges(triangles)
    d = vertices[e[:, 1]] - vertices[e[:, 0]]
    return float(np.max(np.hypot(d[:, 0], d[:, 1])))


def _boundary_topology(triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Oriented boundary edges (domain on the left) chained into one loop."""
    directed = np.vstack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    keys = np.sort(directed, axis=1)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    once = counts[inverse] == 1
    if np.any(counts > 2):
        raise MeshError("non-manifold mesh: an edge is shared by more than two triangles")
    bnd = directed[once]
    successor = {}
    for i, j in bnd:
        if i in successor:
            raise MeshError("boundary is not a simple loop")
        successor[int(i)] = int(j)
    start = min(successor)
    loop = [start]
    node = successor[start]
    while node != start:
        loop.append(node)
        if len(loop) > len(successor):
            raise MeshError("boundary is not a single closed loop")
        node = successor[node]
    if len(loop) != len(successor):
        raise MeshError("boundary consists of more than one loop")
    loop = np.array(loop, dtype=np.int64)
    edges = np.column_stack([loop, np.roll(loop, -1)])
    return edges, loop


def _orient_ccw(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = vertices[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    tri = triangles.copy()
    flip = cross < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    return tri


def _make_mesh(vertices: np.ndarray, triangles: np.ndarray, shape: str) -> Mesh:
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    edges, loop = _boundary_topology(triangles)
    return Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary_edges=edges,
        boundary_nodes=loop,
        h=_max_edge_length(vertices, triangles),
        shape=shape,
    )


def _square_mesh(n: int) -> Mesh:
    _check_cap((n + 1) ** 2)
    t = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(t, t)  # row index = y
    vertices = np.column_stack([xx.ravel(), yy.ravel()])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    sw = idx[:-1, :-1].ravel()
    se = idx[:-1, 1:].ravel()
    nw = idx[1:, :-1].ravel()
    ne = idx[1:, 1:].ravel()
    lower = np.column_stack([sw, se, ne])
    upper = np.column_stack([sw, ne, nw])
    triangles = np.empty((2 * len(sw), 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper
    return _make_mesh(vertices, triangles, "square")


def _disk_points(rings: int) -> np.ndarray:
    pts = [np.zeros((1, 2))]
    for k in range(1, rings + 1):
        theta = 2.0 * np.pi * np.arange(6 * k) / (6 * k)
        r = k / rings
        pts.append(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))
    return np.vstack(pts)


def _disk_mesh(rings: int) -> Mesh:
    _check_cap(1 + 3 * rings * (rings + 1))
    vertices = _disk_points(rings)
    tri = Delaunay(vertices, qhull_options="Qbb Qc Qz Q12 Qt").simplices.astype(np.int64)
    tri = _orient_ccw(vertices, tri)
    # Canonical order so the output does not depend on qhull's traversal.
    tri = np.array([np.roll(t, -int(np.argmin(t))) for t in tri], dtype=np.int64)
    tri = tri[np.lexsort(tri.T[::-1])]
    return _make_mesh(vertices, tri, "disk")


def generate(shape: str, h_target: float) -> Mesh:
    """Generate a square or disk mesh.

    For the square, ``h_target`` bounds the grid spacing (the legs of the
    right triangles); for the disk it bounds every edge, in particular the
    boundary segments of the inscribed polygon.
    """
    if not h_target > 0:
        raise MeshError(f"h_target must be positive, got {h_target}")
    if shape == "square":
        n = max(1, math.ceil(1.0 / h_target - 1e-12))
        _check_cap((n + 1) ** 2)
        return _square_mesh(n)
    if shape == "disk":
        rings = max(1, math.ceil(1.0 / h_target - 1e-12))
        while True:
            _check_cap(1 + 3 * rings * (rings + 1))
            mesh = _disk_mesh(rings)
            if mesh.h <= h_target:
                return mesh
            rings += 1
    raise MeshError(f"unknown shape {shape!r}; expected 'square' or 'disk'")


def refine(mesh: Mesh) -> Mesh:
    """Uniform red refinement: every triangle is split into four."""
    edges = mesh.edges()
    nv = mesh.n_vertices
    _check_cap(nv + len(edges))
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])

    lookup = {(int(i), int(j)): nv + k for k, (i, j) in enumerate(edges)}

    def mid(a, b):
        return np.array([lookup[(min(i, j), max(i, j))] for i, j in zip(a, b)], dtype=np.int64)

    t = mesh.triangles
    m01 = mid(t[:, 0], t[:, 1])
    m12 = mid(t[:, 1], t[:, 2])
    m20 = mid(t[:, 2], t[:, 0])
    triangles = np.vstack([
        np.column_stack([t[:, 0], m01, m20]),
        np.column_stack([m01, t[:, 1], m12]),
        np.column_stack([m20, m12, t[:, 2]]),
        np.column_stack([m01, m12, m20]),
    ])
    return _make_mesh(vertices, triangles, mesh.shape)


def boundary_normal(mesh: Mesh, edge_index: int) -> np.ndarray:
    """Outward unit normal of boundary edge ``edge_index``."""
    if not 0 <= edge_index < mesh.n_boundary_edges:
        raise IndexError(f"boundary edge index {edge_index} out of range [0, {mesh.n_boundary_edges})")
    return mesh._normals[edge_index].copy()


def boundary_normals(mesh: Mesh) -> np.ndarray:
    return mesh._normals.copy()


def _incircle(a, b, c, d):
    """Positive when d lies strictly inside the circumcircle of ccw (a, b, c)."""
    ad = a - d
    bd = b - d
    cd = c - d
    return (
        (ad[..., 0] ** 2 + ad[..., 1] ** 2) * (bd[..., 0] * cd[..., 1] - cd[..., 0] * bd[..., 1])
        - (bd[..., 0] ** 2 + bd[..., 1] ** 2) * (ad[..., 0] * cd[..., 1] - cd[..., 0] * ad[..., 1])
        + (cd[..., 0] ** 2 + cd[..., 1] ** 2) * (ad[..., 0] * bd[..., 1] - bd[..., 0] * ad[..., 1])
    )


def is_delaunay(mesh: Mesh, tol: float = 1e-12) -> bool:
    """Local Delaunay test over every interior edge.

    For a conforming triangulation, local Delaunay on all edges is
    equivalent to the empty-circumcircle property.  The predicate is scaled
    by the fourth power of the local edge length so ``tol`` is relative.
    """
    tri = mesh.triangles
    directed = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    opposite = np.concatenate([tri[:, 2], tri[:, 0], tri[:, 1]])
    owner = np.tile(np.arange(len(tri)), 3)
    keys = np.sort(directed, axis=1)
    order = np.lexsort((keys[:, 1], keys[:, 0]))
    keys = keys[order]
    same = np.all(keys[1:] == keys[:-1], axis=1)
    first = order[:-1][same]
    second = order[1:][same]
    v = mesh.vertices
    t1 = tri[owner[first]]
    d = v[opposite[second]]
    val = _incircle(v[t1[:, 0]], v[t1[:, 1]], v[t1[:, 2]], d)
    e = v[directed[first, 1]] - v[directed[first, 0]]
    scale = (e[:, 0] ** 2 + e[:, 1] ** 2) ** 2
    return bool(np.all(val <= tol * scale))


def validate(mesh: Mesh) -> None:
    """Check the structural invariants; raise MeshError on the first failure."""
    if np.any(mesh.signed_areas() <= 0):
        raise MeshError("triangle with non-positive signed area")
    tri = mesh.triangles
    all_edges = np.sort(np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(all_edges, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise MeshError("edge shared by more than two triangles")
    bset = {tuple(sorted(map(int, e))) for e in mesh.boundary_edges}
    once = {tuple(map(int, e)) for e in uniq[counts == 1]}
    if bset != once:
        raise MeshError("boundary edges do not match edges with a single triangle")
    loop = mesh.boundary_nodes
    if len(set(loop.tolist())) != len(loop) or len(loop) != len(mesh.boundary_edges):
        raise MeshError("boundary nodes do not form a single loop")
    if not np.array_equal(mesh.boundary_edges[:, 0], loop) or not np.array_equal(
        mesh.boundary_edges[:, 1], np.roll(loop, -1)
    ):
        raise MeshError("boundary edges are not chained along the boundary loop")
    norms = np.hypot(mesh._normals[:, 0], mesh._normals[:, 1])
    if np.any(np.abs(norms - 1.0) > 1e-12):
        raise MeshError("boundary normal is not of unit length")
    n_edges = len(uniq)
    if mesh.n_vertices - n_edges + mesh.n_triangles != 1:
        raise MeshError("Euler characteristic differs from that of a disk")


def _guess_shape(vertices: np.ndarray, bedges: np.ndarray) -> str:
    b = vertices[bedges[:, 0]]
    r = np.hypot(b[:, 0], b[:, 1])
    # Refined disks keep chord midpoints on the boundary; their radius falls short of 1 by the sagitta.
    longest = float(np.max(np.linalg.norm(vertices[bedges[:, 0]] - vertices[bedges[:, 1]], axis=1)))
    if np.any(np.abs(r - 1.0) < 1e-12) and np.all(r <= 1.0 + 1e-12) and np.all(r >= 1.0 - longest**2):
        return "disk"
    if np.allclose(vertices.min(axis=0), 0.0) and np.allclose(vertices.max(axis=0), 1.0) and np.all(
        np.min(np.abs(np.column_stack([b, b - 1.0])), axis=1) < 1e-12
    ):
        return "square"
    return "custom"


def write_mesh(mesh: Mesh, path) -> None:
    path = Path(path)
    lines = [MESH_HEADER, f"{mesh.n_vertices} {mesh.n_triangles} {mesh.n_boundary_edges}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    lines += [f"{i} {j}" for i, j in mesh.boundary_edges]
    from dtnlab.io import atomic_write_text

    atomic_write_text(path, "\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip()]
    if not rows or " ".join(rows[0]) != MESH_HEADER:
        raise MeshError(f"{path}: missing '{MESH_HEADER}' header")
    try:
        nv, nt, nbe = (int(s) for s in rows[1])
        body = rows[2:]
        if len(body) != nv + nt + nbe:
            raise MeshError(f"{path}: expected {nv + nt + nbe} data lines, found {len(body)}")
        vertices = np.array([[float(s) for s in r] for r in body[:nv]], dtype=np.float64)
        triangles = np.array([[int(s) for s in r] for r in body[nv:nv + nt]], dtype=np.int64)
        bedges = np.array([[int(s) for s in r] for r in body[nv + nt:]], dtype=np.int64)
    except (ValueError, IndexError) as exc:
        raise MeshError(f"{path}: malformed mesh file ({exc})") from exc
    vertices = vertices.reshape(nv, 2)
    triangles = triangles.reshape(nt, 3)
    bedges = bedges.reshape(nbe, 2)
    mesh = Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary_edges=bedges,
        boundary_nodes=bedges[:, 0].copy(),
        h=_max_edge_length(vertices, triangles),
        shape=_guess_shape(vertices, bedges),
    )
    validate(mesh)
    return mesh
