"""P1 finite element assembly of the operator form, mass matrices and Robin form.

Convention: ``K[i, j] = a(phi_j, phi_i)``, the trial index is the column.
With that convention the discrete operator acts as ``K @ u`` on nodal
vectors and ``a(u, v) = v @ K @ u``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from dtnlab.coefficients import QUAD_BARY, QUAD_WEIGHTS, CoefficientSet, preset
from dtnlab.mesh import Mesh

__all__ = [
    "AssemblyError",
    "AssembledSystem",
    "RobinSystem",
    "assemble",
    "assemble_robin",
    "dirichlet_blocks",
    "element_geometry",
    "diffusion_matrix",
    "advection_matrix",
    "transport_matrix",
    "mass_matrix",
    "boundary_mass_matrix",
]

MIN_AREA = 1e-14
_LOCAL_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


class AssemblyError(ValueError):
    pass


def element_geometry(mesh: Mesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(area, grads, qpts)`` per triangle.

    ``grads[t, i]`` is the constant gradient of the i-th local basis function,
    ``qpts[t, q]`` the q-th point of the 3-point degree-2 rule.
    """
    p = mesh.vertices[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    if np.any(area < MIN_AREA):
        bad = int(np.argmin(area))
        raise AssemblyError(f"degenerate triangle {bad} (area {area[bad]:.3e})")
    i1 = [1, 2, 0]
    i2 = [2, 0, 1]
    grads = np.stack([y[:, i1] - y[:, i2], x[:, i2] - x[:, i1]], axis=-1) / (2.0 * area[:, None, None])
    qpts = np.einsum("qk,tkd->tqd", QUAD_BARY, p)
    return area, grads, qpts


def _scatter(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    n = mesh.n_vertices
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    # COO -> CSR sums duplicates in a fixed order, so the result is deterministic.
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def diffusion_matrix(mesh: Mesh, coeffs: CoefficientSet, geom=None) -> sp.csr_matrix:
    area, grads, qpts = geom or element_geometry(mesh)
    amat = coeffs.a(qpts[..., 0], qpts[..., 1])  # (nt, 3, 2, 2)
    abar = np.einsum("q,tqij->tij", QUAD_WEIGHTS, amat)
    local = area[:, None, None] * np.einsum("tid,tde,tje->tij", grads, abar, grads)
    return _scatter(mesh, local)


def advection_matrix(mesh: Mesh, field, geom=None) -> sp.csr_matrix:
    """``A[i, j] = int (b . grad phi_j) phi_i``."""
    area, grads, qpts = geom or element_geometry(mesh)
    bq = field(qpts[..., 0], qpts[..., 1])  # (nt, 3, 2)
    bdotg = np.einsum("tqd,tjd->tqj", bq, grads)
    local = area[:, None, None] * np.einsum("q,qi,tqj->tij", QUAD_WEIGHTS, QUAD_BARY, bdotg)
    return _scatter(mesh, local)


def transport_matrix(mesh: Mesh, field, geom=None) -> sp.csr_matrix:
    """``C[i, j] = int phi_j (c . grad phi_i)``; the transpose of the advection matrix."""
    return advection_matrix(mesh, field, geom).T.tocsr()


def mass_matrix(mesh: Mesh, geom=None) -> sp.csr_matrix:
    area = (geom or element_geometry(mesh))[0]
    return _scatter(mesh, area[:, None, None] * _LOCAL_MASS)


def boundary_mass_matrix(mesh: Mesh, lumped: bool = False, beta=None) -> sp.csr_matrix:
    """Gram matrix of boundary traces, optionally weighted by ``beta``.

    ``beta`` is None, a scalar, or per-vertex values (length ``n_vertices``)
    interpolated linearly along each edge; the weighted products of three
    linears are integrated exactly by Simpson's rule.
    """
    n = mesh.n_vertices
    e = mesh.boundary_edges
    L = mesh.edge_lengths()
    if beta is None or np.isscalar(beta):
        scale = 1.0 if beta is None else float(beta)
        if lumped:
            local = np.zeros((len(e), 2, 2))
            local[:, 0, 0] = local[:, 1, 1] = L / 2.0
        else:
            local = (L / 6.0)[:, None, None] * np.array([[2.0, 1.0], [1.0, 2.0]])
        local = scale * local
    else:
        beta = np.asarray(beta, dtype=float)
        b0 = beta[e[:, 0]]
        b1 = beta[e[:, 1]]
        bm = 0.5 * (b0 + b1)
        if lumped:
            local = np.zeros((len(e), 2, 2))
            local[:, 0, 0] = b0 * L / 2.0
            local[:, 1, 1] = b1 * L / 2.0
        else:
            # Simpson nodes s = 0, 1/2, 1 with phi0 = 1 - s, phi1 = s.
            w = L / 6.0
            local = np.empty((len(e), 2, 2))
            local[:, 0, 0] = w * (b0 + 4.0 * bm * 0.25)
            local[:, 1, 1] = w * (b1 + 4.0 * bm * 0.25)
            local[:, 0, 1] = local[:, 1, 0] = w * (4.0 * bm * 0.25)
    rows = np.repeat(e, 2, axis=1).ravel()
    cols = np.tile(e, (1, 2)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    K: sp.csr_matrix
    M: sp.csr_matrix
    Mb: sp.csr_matrix
    interior_idx: np.ndarray
    boundary_idx: np.ndarray
    mesh: Mesh
    coeffs: CoefficientSet
    quadrature_order: int = 2
    lumped_boundary_mass: bool = False
    parts: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.K.shape[0]

    @property
    def symmetric(self) -> bool:
        """True in the self-adjoint case (b = c, real d)."""
        return self.coeffs.b_equals_c

    def boundary_mass(self, lumped: bool | None = None) -> sp.csr_matrix:
        if lumped is None or lumped == self.lumped_boundary_mass:
            return self.Mb
        return boundary_mass_matrix(self.mesh, lumped=lumped)

    def with_d(self, d: float) -> "AssembledSystem":
        """Same system with the constant reaction coefficient replaced by ``d``."""
        delta = float(d) - float(self.coeffs.d)
        return AssembledSystem(
            K=(self.K + delta * self.M).tocsr(),
            M=self.M,
            Mb=self.Mb,
            interior_idx=self.interior_idx,
            boundary_idx=self.boundary_idx,
            mesh=self.mesh,
            coeffs=self.coeffs.with_d(d),
            quadrature_order=self.quadrature_order,
            lumped_boundary_mass=self.lumped_boundary_mass,
        )


@dataclass(frozen=True, eq=False)
class RobinSystem:
    Kbeta: sp.csr_matrix
    beta: float | np.ndarray
    system: AssembledSystem


def assemble(mesh: Mesh, coeffs: CoefficientSet | None = None, *, lumped_boundary_mass: bool = False) -> AssembledSystem:
    """Assemble ``K``, ``M`` and ``Mb`` for ``coeffs`` (Laplacian by default)."""
    coeffs = coeffs or preset("laplace")
    geom = element_geometry(mesh)
    M = mass_matrix(mesh, geom)
    parts = {"diffusion": diffusion_matrix(mesh, coeffs, geom)}
    if not coeffs.b.is_zero:
        parts["advection_b"] = advection_matrix(mesh, coeffs.b, geom)
    if not coeffs.c.is_zero:
        parts["advection_c"] = transport_matrix(mesh, coeffs.c, geom)
    if coeffs.d != 0:
        parts["reaction"] = (coeffs.d * M).tocsr()
    K = parts["diffusion"]
    for key in ("advection_b", "advection_c", "reaction"):
        if key in parts:
            K = K + parts[key]
    K = K.tocsr()
    K.sort_indices()
    Mb = boundary_mass_matrix(mesh, lumped=lumped_boundary_mass)
    return AssembledSystem(
        K=K,
        M=M,
        Mb=Mb,
        interior_idx=mesh.interior_nodes,
        boundary_idx=mesh.boundary_nodes.copy(),
        mesh=mesh,
        coeffs=coeffs,
        lumped_boundary_mass=lumped_boundary_mass,
        parts=parts,
    )


def assemble_robin(sys: AssembledSystem, beta) -> RobinSystem:
    """``K + int beta u v`` over the boundary; ``beta`` scalar or per-vertex values."""
    if np.isscalar(beta):
        beta = float(beta)
        if beta == 0.0:
            return RobinSystem(sys.K.copy(), beta, sys)
        return RobinSystem((sys.K + beta * sys.Mb).tocsr(), beta, sys)
    beta = np.asarray(beta, dtype=float)
    if beta.shape == (len(sys.boundary_idx),):
        full = np.zeros(sys.n)
        full[sys.boundary_idx] = beta
    elif beta.shape == (sys.n,):
        full = beta
    else:
        raise AssemblyError(
            f"beta has length {beta.size}; expected {len(sys.boundary_idx)} boundary values or {sys.n} nodal values"
        )
    weighted = boundary_mass_matrix(sys.mesh, lumped=sys.lumped_boundary_mass, beta=full)
    return RobinSystem((sys.K + weighted).tocsr(), beta, sys)


def dirichlet_blocks(sys: AssembledSystem) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Interior-interior blocks of ``K`` and ``M``: the discrete Dirichlet realization."""
    I = sys.interior_idx
    if len(I) == 0:
        raise AssemblyError("mesh has no interior nodes; refine it")
    return sys.K[I][:, I].tocsr(), sys.M[I][:, I].tocsr()
