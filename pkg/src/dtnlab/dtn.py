"""Discrete Dirichlet-to-Neumann operator as a Schur complement.

With ``A = K - lam*M`` split into interior (I) and boundary (B) blocks,

    S(lam) = A_BB - A_BI A_II^{-1} A_IB,

and the discrete operator is the pencil ``(S, Mb_BB)``: ``D phi = Mb^{-1} S phi``.
``S`` is the form restricted to discrete-harmonic functions, i.e. those whose
interior residual ``(A u)_I`` vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from dtnlab.assembly import AssembledSystem, AssemblyError, diffusion_matrix, preset

__all__ = [
    "SpectrumHit",
    "NotHarmonic",
    "DtnOperator",
    "build",
    "lift",
    "lift_matrix",
    "conormal",
    "decompose",
    "ellipticity_constant",
    "form",
]

DEFAULT_PIVOT_TOL = 1e-10
DEFAULT_COND_MAX = 1e12


class SpectrumHit(ArithmeticError):
    """``lam`` is (numerically) a Dirichlet eigenvalue; the operator is undefined there."""

    def __init__(self, lam: float, detail: str):
        super().__init__(f"lambda = {lam!r} lies in the discrete Dirichlet spectrum ({detail})")
        self.lam = lam
        self.detail = detail


class NotHarmonic(ValueError):
    """The nodal vector does not solve the interior equation."""


@dataclass(frozen=True, eq=False)
class DtnOperator:
    lam: float
    S: np.ndarray
    Mb_bb: np.ndarray
    A: sp.csr_matrix
    system: AssembledSystem
    lumped_boundary_mass: bool
    cond_estimate: float
    _lu: object
    _AIB: sp.csr_matrix
    _harmonic_interior: np.ndarray  # -A_II^{-1} A_IB, dense

    @property
    def m(self) -> int:
        return self.S.shape[0]

    @property
    def boundary_idx(self) -> np.ndarray:
        return self.system.boundary_idx

    @property
    def interior_idx(self) -> np.ndarray:
        return self.system.interior_idx

    def generator(self) -> np.ndarray:
        """Dense ``Mb^{-1} S``; the generator of the semigroup is its negative."""
        if self.lumped_boundary_mass:
            return self.S / np.diag(self.Mb_bb)[:, None]
        c = sla.cho_factor(self.Mb_bb)
        return sla.cho_solve(c, self.S)

    def apply(self, phi: np.ndarray) -> np.ndarray:
        """``D phi``, solving with the boundary Gram matrix."""
        return np.linalg.solve(self.Mb_bb, self.S @ phi)

    def solve_interior(self, rhs: np.ndarray) -> np.ndarray:
        return self._lu.solve(rhs)


def _factor(AII: sp.csc_matrix, lam: float, pivot_tol: float, cond_max: float):
    n = AII.shape[0]
    try:
        lu = spla.splu(AII, permc_spec="COLAMD", diag_pivot_thresh=1.0)
    except RuntimeError as exc:  # exactly singular
        raise SpectrumHit(lam, str(exc)) from exc
    piv = np.abs(lu.U.diagonal())
    scale = float(np.max(piv)) if n else 1.0
    if n and float(np.min(piv)) <= pivot_tol * scale:
        raise SpectrumHit(lam, f"smallest pivot {np.min(piv):.3e} relative to {scale:.3e}")
    inv_op = spla.LinearOperator(
        AII.shape, matvec=lu.solve, rmatvec=lambda x: lu.solve(x, trans="T"), dtype=float
    )
    inv_norm = spla.onenormest(inv_op) if n > 4 else np.abs(np.linalg.inv(AII.toarray())).sum(axis=0).max()
    cond = float(spla.norm(AII, 1) * inv_norm) if n else 1.0
    if not np.isfinite(cond) or cond > cond_max:
        raise SpectrumHit(lam, f"condition estimate {cond:.3e} exceeds {cond_max:.1e}")
    return lu, cond


def build(
    sys: AssembledSystem,
    lam: float,
    pivot_tol: float = DEFAULT_PIVOT_TOL,
    *,
    lumped_boundary_mass: bool | None = None,
    cond_max: float = DEFAULT_COND_MAX,
) -> DtnOperator:
    """Form the Schur complement ``S(lam)`` and the boundary Gram matrix.

    Raises :class:`SpectrumHit` when ``A_II`` is numerically singular, i.e.
    ``lam`` is in the discrete Dirichlet spectrum.
    """
    if not pivot_tol > 0:
        raise ValueError("pivot_tol must be positive")
    lam = float(lam)
    I, B = sys.interior_idx, sys.boundary_idx
    if len(I) == 0:
        raise AssemblyError("mesh has no interior nodes; refine it")
    A = (sys.K - lam * sys.M).tocsr()
    AII = A[I][:, I].tocsc()
    AIB = A[I][:, B].tocsr()
    ABI = A[B][:, I].tocsr()
    ABB = A[B][:, B].toarray()
    lu, cond = _factor(AII, lam, pivot_tol, cond_max)
    harm = -lu.solve(AIB.toarray())
    S = ABB + ABI @ harm
    S = np.asarray(S)
    lumped = sys.lumped_boundary_mass if lumped_boundary_mass is None else lumped_boundary_mass
    Mb_bb = sys.boundary_mass(lumped)[B][:, B].toarray()
    return DtnOperator(lam, S, Mb_bb, A, sys, lumped, cond, lu, AIB, harm)


def lift_matrix(op: DtnOperator) -> np.ndarray:
    """Dense ``n x m`` matrix mapping boundary values to the discrete-harmonic extension."""
    L = np.zeros((op.system.n, op.m))
    L[op.boundary_idx] = np.eye(op.m)
    L[op.interior_idx] = op._harmonic_interior
    return L


def lift(op: DtnOperator, phi) -> np.ndarray:
    """Discrete-harmonic extension of boundary values ``phi``."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape[0] != op.m:
        raise ValueError(f"phi has length {phi.shape[0]}, expected {op.m}")
    u = np.zeros((op.system.n,) + phi.shape[1:])
    u[op.boundary_idx] = phi
    u[op.interior_idx] = -op.solve_interior(op._AIB @ phi)
    return u


def form(op_or_A, u: np.ndarray, v: np.ndarray) -> float:
    """``a_lam(u, v) = v @ A @ u`` with the trial-index-is-column convention."""
    A = op_or_A.A if isinstance(op_or_A, DtnOperator) else op_or_A
    return float(v @ (A @ u))


def _interior_residual(sys: AssembledSystem, lam: float, u: np.ndarray) -> tuple[np.ndarray, float]:
    Au = sys.K @ u - lam * (sys.M @ u)
    return Au, float(np.linalg.norm(Au[sys.interior_idx]))


def conormal(sys: AssembledSystem, lam: float, u: np.ndarray, tol: float = 1e-8, *, lumped_boundary_mass: bool | None = None) -> np.ndarray:
    """Weak conormal derivative ``Mb_BB^{-1} (A u)_B`` of a discrete-harmonic ``u``.

    ``tol`` bounds the interior residual relative to ``|A| |u|``.
    """
    u = np.asarray(u, dtype=float)
    Au, res = _interior_residual(sys, lam, u)
    A_scale = spla.norm(sys.K, 1) + abs(lam) * spla.norm(sys.M, 1)
    if res > tol * max(A_scale * np.linalg.norm(u), np.finfo(float).tiny):
        raise NotHarmonic(f"interior residual {res:.3e} exceeds tolerance")
    B = sys.boundary_idx
    Mb = sys.boundary_mass(lumped_boundary_mass)[B][:, B].toarray()
    return np.linalg.solve(Mb, Au[B])


def decompose(op: DtnOperator, u) -> tuple[np.ndarray, np.ndarray]:
    """Split ``u = u0 + u1`` with ``u0`` zero on the boundary and ``u1`` discrete-harmonic."""
    u = np.asarray(u, dtype=float)
    u1 = lift(op, u[op.boundary_idx])
    u0 = u - u1
    u0[op.boundary_idx] = 0.0
    return u0, u1


def ellipticity_constant(op: DtnOperator, sys: AssembledSystem | None = None, kappa: float | None = None) -> float:
    """Smallest ``omega`` with ``sym(S) + omega Mb >= kappa/4 * G_harm``.

    ``G_harm = L^T (M + K_laplace) L`` is the H^1 Gram matrix compressed
    through the harmonic lift ``L``.  A negative value means the estimate
    already holds with ``omega = 0``.
    """
    sys = sys or op.system
    kappa = sys.coeffs.kappa if kappa is None else kappa
    G = (sys.M + diffusion_matrix(sys.mesh, preset("laplace"))).tocsr()
    L = lift_matrix(op)
    G_harm = L.T @ (G @ L)
    G_harm = 0.5 * (G_harm + G_harm.T)
    sym_S = 0.5 * (op.S + op.S.T)
    mu = sla.eigh(sym_S - 0.25 * kappa * G_harm, op.Mb_bb, eigvals_only=True, subset_by_index=[0, 0])
    return float(-mu[0])
