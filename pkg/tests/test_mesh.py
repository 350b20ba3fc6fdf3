import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dtnlab import mesh
from dtnlab.mesh import MeshError, ResourceLimitError


def test_square_h05_counts():
    m = mesh.generate("square", 0.5)
    assert (m.n_vertices, m.n_triangles, m.n_boundary_edges) == (9, 8, 8)
    assert len(m.interior_nodes) == 1


@settings(max_examples=15, deadline=None)
@given(st.floats(min_value=0.04, max_value=0.9))
def test_square_area_is_one(h):
    m = mesh.generate("square", h)
    assert abs(m.area() - 1.0) <= 1e-12
    assert np.all(m.signed_areas() > 0)
    mesh.validate(m)


def test_disk_area_inscribed_polygon(disk_005):
    n = disk_005.n_boundary_edges
    polygon = 0.5 * n * math.sin(2 * math.pi / n)
    assert abs(disk_005.area() - polygon) <= 1e-12
    assert abs(disk_005.area() - math.pi) / math.pi < 2e-3


@pytest.mark.parametrize("shape", ["square", "disk"])
@pytest.mark.parametrize("h", [0.3, 0.1])
def test_generated_mesh_quality(shape, h):
    m = mesh.generate(shape, h)
    mesh.validate(m)
    assert mesh.is_delaunay(m)
    v, e, f = m.n_vertices, len(m.edges()), m.n_triangles
    assert v - e + f == 1
    if shape == "disk":
        assert m.h <= h


def test_square_h_semantics():
    # legs are bounded by h_target; the longest edge is a diagonal
    m = mesh.generate("square", 0.1)
    assert m.h == pytest.approx(0.1 * math.sqrt(2), rel=1e-12)


def test_refine_counts_and_area(square_coarse, disk_02):
    m = mesh.generate("square", 0.5)
    r = mesh.refine(m)
    assert r.n_triangles == 32
    assert abs(r.area() - m.area()) <= 1e-12
    rd = mesh.refine(disk_02)
    assert len(rd.boundary_nodes) == 2 * len(disk_02.boundary_nodes)
    assert abs(rd.area() - disk_02.area()) <= 1e-12
    assert mesh.is_delaunay(rd)
    mesh.validate(rd)


def test_refine_keeps_old_vertices(disk_02):
    r = mesh.refine(disk_02)
    assert np.array_equal(r.vertices[: disk_02.n_vertices], disk_02.vertices)


def _edge_index(m, a, b):
    for k, (i, j) in enumerate(m.boundary_edges):
        pa, pb = m.vertices[i], m.vertices[j]
        if np.allclose(pa, a) and np.allclose(pb, b):
            return k
    raise AssertionError("edge not found")


def test_square_normals():
    m = mesh.generate("square", 0.5)
    bottom = _edge_index(m, [0.0, 0.0], [0.5, 0.0])
    right = _edge_index(m, [1.0, 0.0], [1.0, 0.5])
    assert np.allclose(mesh.boundary_normal(m, bottom), [0.0, -1.0])
    assert np.allclose(mesh.boundary_normal(m, right), [1.0, 0.0])


def test_disk_normals_near_radial(disk_01):
    nrm = mesh.boundary_normals(disk_01)
    assert np.allclose(np.linalg.norm(nrm, axis=1), 1.0, atol=1e-12)
    mid = disk_01.vertices[disk_01.boundary_edges].mean(axis=1)
    radial = mid / np.linalg.norm(mid, axis=1)[:, None]
    assert np.max(np.linalg.norm(nrm - radial, axis=1)) <= disk_01.h


def test_boundary_normal_out_of_range(square_coarse):
    with pytest.raises(IndexError):
        mesh.boundary_normal(square_coarse, square_coarse.n_boundary_edges)


def test_boundary_loop_is_ccw(disk_02, square_coarse):
    for m in (disk_02, square_coarse):
        p = m.vertices[m.boundary_nodes]
        x, y = p[:, 0], p[:, 1]
        shoelace = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        assert shoelace > 0
        assert m.boundary_nodes[0] == m.boundary_nodes.min()


@pytest.mark.parametrize("shape", ["square", "disk"])
def test_roundtrip_bit_exact(tmp_path, shape):
    m = mesh.refine(mesh.generate(shape, 0.3))
    p = tmp_path / "m.mesh"
    mesh.write_mesh(m, p)
    r = mesh.read_mesh(p)
    assert r.shape == m.shape
    assert np.array_equal(r.vertices, m.vertices)
    assert np.array_equal(r.triangles, m.triangles)
    assert np.array_equal(r.boundary_edges, m.boundary_edges)
    assert np.array_equal(r.boundary_nodes, m.boundary_nodes)
    assert p.read_text().splitlines()[0] == "DTNMESH 1"


def test_generation_deterministic():
    a = mesh.generate("disk", 0.15)
    b = mesh.generate("disk", 0.15)
    assert a.same_as(b)


@pytest.mark.parametrize("shape,h", [("square", 0.0), ("square", -1.0), ("hexagon", 0.1), ("disk", float("nan"))])
def test_invalid_arguments(shape, h):
    with pytest.raises(MeshError):
        mesh.generate(shape, h)


def test_resource_cap(monkeypatch):
    monkeypatch.setenv("DTN_MAX_DOFS", "100")
    with pytest.raises(ResourceLimitError):
        mesh.generate("square", 0.05)


def test_read_rejects_garbage(tmp_path):
    p = tmp_path / "bad.mesh"
    p.write_text("NOT A MESH\n")
    with pytest.raises(MeshError):
        mesh.read_mesh(p)
