"""Eigenvalue problems: Dirichlet, Robin and DtN pencils, first eigenvalues, Krein-Rutman checks."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from dtnlab.assembly import AssembledSystem, assemble, assemble_robin, dirichlet_blocks
from dtnlab.coefficients import preset
from dtnlab.dtn import DtnOperator
from dtnlab.mesh import Mesh

__all__ = [
    "SpectrumResult",
    "EigenError",
    "eig_sym_pencil",
    "eig_general_pencil",
    "lambda1_dirichlet",
    "lambda1_form",
    "lambda1_sparse",
    "dirichlet_spectrum",
    "robin_spectrum",
    "dtn_spectrum",
    "count_below",
    "krein_rutman_check",
    "DualityRow",
    "duality_residuals",
]

log = logging.getLogger(__name__)

DEFAULT_DENSE_CAP = 4000


class EigenError(np.linalg.LinAlgError):
    pass


def dense_cap() -> int:
    value = os.environ.get("DTN_DENSE_CAP")
    return int(value) if value else DEFAULT_DENSE_CAP


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None
    problem_tag: str
    residual_norms: np.ndarray
    scale: float = 1.0

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.eigenvalues)

    @property
    def max_relative_residual(self) -> float:
        if len(self.residual_norms) == 0:
            return 0.0
        return float(np.max(self.residual_norms) / self.scale)


def _dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def _residuals(A, B, mu, X) -> np.ndarray:
    R = A @ X - (B @ X) * mu[None, :]
    return np.linalg.norm(R, axis=0) / np.linalg.norm(X, axis=0)


def _normalize_signs(X: np.ndarray) -> np.ndarray:
    # Largest-magnitude component made positive (real part for complex vectors).
    idx = np.argmax(np.abs(X), axis=0)
    pivot = X[idx, np.arange(X.shape[1])]
    phase = pivot / np.abs(pivot)
    return X / phase[None, :]


def _clamp(count: int, n: int) -> int:
    if count > n:
        log.warning("count %d exceeds dimension %d; clamped", count, n)
        return n
    if count < 1:
        raise ValueError("count must be positive")
    return count


def eig_sym_pencil(A, B, count: int, tag: str = "generic") -> SpectrumResult:
    """Smallest ``count`` eigenpairs of the symmetric-definite pencil ``A x = mu B x``.

    Cholesky reduction of ``B`` followed by a tridiagonal eigensolver
    (LAPACK ``sygvd`` path).  Eigenvectors are B-orthonormal.
    """
    Ad, Bd = _dense(A), _dense(B)
    n = Ad.shape[0]
    count = _clamp(count, n)
    try:
        sla.cholesky(Bd)
    except np.linalg.LinAlgError as exc:
        raise EigenError("B is not positive definite") from exc
    Ad = 0.5 * (Ad + Ad.T)
    mu, X = sla.eigh(Ad, Bd, subset_by_index=[0, count - 1])
    X = _normalize_signs(X)
    scale = max(np.abs(Ad).sum(axis=0).max(), np.abs(mu).max() * np.abs(Bd).sum(axis=0).max(), 1e-300)
    return SpectrumResult(mu, X, tag, _residuals(Ad, Bd, mu, X), scale)


def eig_general_pencil(A, B, count: int, tag: str = "generic") -> SpectrumResult:
    """Eigenpairs with the smallest real parts of ``A x = mu B x``, B symmetric positive definite.

    The pencil is reduced to ``L^{-1} A L^{-T}`` with ``B = L L^T`` and solved
    by Hessenberg reduction and shifted QR (LAPACK ``geev``).  Conjugate
    pairs are reported adjacently, positive imaginary part first.
    """
    Ad, Bd = _dense(A), _dense(B)
    n = Ad.shape[0]
    count = _clamp(count, n)
    try:
        Lc = sla.cholesky(Bd, lower=True)
    except np.linalg.LinAlgError as exc:
        raise EigenError("B is not positive definite") from exc
    C = sla.solve_triangular(Lc, sla.solve_triangular(Lc, Ad, lower=True).T, lower=True).T
    try:
        mu, Y = sla.eig(C)
    except np.linalg.LinAlgError as exc:
        raise EigenError(f"QR iteration did not converge: {exc}") from exc
    X = sla.solve_triangular(Lc.T, Y, lower=False)
    order = np.lexsort((-mu.imag, np.round(mu.real, 12)))
    mu, X = mu[order][:count], X[:, order][:, :count]
    scale = max(np.abs(Ad).sum(axis=0).max(), np.abs(mu).max() * np.abs(Bd).sum(axis=0).max(), 1e-300)
    res = _residuals(Ad, Bd, mu, X)
    if np.all(np.abs(mu.imag) <= 1e-10 * max(1.0, np.abs(mu).max())):
        mu = mu.real
        X = X.real
    X = _normalize_signs(X)
    return SpectrumResult(mu, X, tag, res, scale)


def count_below(A, B, x: float) -> int:
    """Number of eigenvalues of the symmetric pencil (A, B) below ``x`` (Sylvester inertia).

    Uses a sparse LU with diagonal pivoting on ``A - x B``, which for a
    symmetric matrix is an LDL^T factorization whose pivot signs give the
    inertia.
    """
    C = (sp.csc_matrix(A) - x * sp.csc_matrix(B)).tocsc()
    C = 0.5 * (C + C.T)
    lu = spla.splu(C.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                   options={"SymmetricMode": True})
    return int(np.sum(lu.U.diagonal() < 0))


def lambda1_sparse(A, B, tol: float = 1e-12) -> tuple[float, np.ndarray]:
    """Smallest eigenpair of a sparse symmetric-definite pencil by shift-invert iteration.

    The shift starts at 0 and is lowered until no eigenvalue lies below it,
    so the eigenvalue nearest the shift is the smallest one.
    """
    A = sp.csc_matrix(A)
    B = sp.csc_matrix(B)
    n = A.shape[0]
    if n <= 200:
        res = eig_sym_pencil(A, B, 1)
        return float(res.eigenvalues[0]), res.eigenvectors[:, 0]
    shift = 0.0
    step = 1.0
    while count_below(A, B, shift) > 0:
        shift -= step
        step *= 4.0
    v0 = np.ones(n)
    mu, X = spla.eigsh(A, k=1, M=B, sigma=shift, which="LM", v0=v0, tol=tol)
    return float(mu[0]), _normalize_signs(X)[:, 0]


def lambda1_dirichlet(mesh: Mesh) -> float:
    """Smallest Dirichlet eigenvalue of the Laplacian on ``mesh``."""
    return lambda1_form(assemble(mesh, preset("laplace")))


def lambda1_form(sys: AssembledSystem) -> float:
    """Smallest eigenvalue of ``(sym(K)_II, M_II)``: the infimum of the Rayleigh quotient on H^1_0."""
    KII, MII = dirichlet_blocks(sys)
    symK = KII if sys.symmetric else 0.5 * (KII + KII.T)
    return lambda1_sparse(symK, MII)[0]


def dirichlet_spectrum(sys: AssembledSystem, count: int) -> SpectrumResult:
    KII, MII = dirichlet_blocks(sys)
    _check_dense(KII.shape[0])
    if sys.symmetric:
        return eig_sym_pencil(KII, MII, count, "dirichlet")
    return eig_general_pencil(KII, MII, count, "dirichlet")


def _check_dense(n: int) -> None:
    from dtnlab.mesh import ResourceLimitError

    if n > dense_cap():
        raise ResourceLimitError(f"dense eigenproblem of size {n} exceeds DTN_DENSE_CAP={dense_cap()}")


def robin_spectrum(sys: AssembledSystem, beta, count: int) -> SpectrumResult:
    """Eigenvalues of ``(K + beta Mb, M)``; symmetric path when b = c."""
    rob = assemble_robin(sys, beta)
    tag = f"robin({beta!r})" if np.isscalar(beta) else "robin(field)"
    _check_dense(sys.n)
    if sys.symmetric:
        return eig_sym_pencil(rob.Kbeta, sys.M, count, tag)
    return eig_general_pencil(rob.Kbeta, sys.M, count, tag)


def dtn_spectrum(op: DtnOperator, count: int) -> SpectrumResult:
    """Eigenvalues of the pencil ``(S(lam), Mb)``."""
    tag = f"dtn({op.lam!r})"
    if op.system.symmetric:
        return eig_sym_pencil(op.S, op.Mb_bb, count, tag)
    return eig_general_pencil(op.S, op.Mb_bb, count, tag)


@dataclass(frozen=True)
class KreinRutmanReport:
    simple: bool
    gap: float
    sign_definite: bool
    real: bool
    eigenvalue: complex

    def as_dict(self) -> dict:
        ev = complex(self.eigenvalue)
        return {
            "simple": self.simple,
            "gap": self.gap,
            "sign_definite": self.sign_definite,
            "real": self.real,
            "eigenvalue_re": ev.real,
            "eigenvalue_im": ev.imag,
        }


def krein_rutman_check(spec: SpectrumResult) -> KreinRutmanReport:
    """First eigenpair: real, simple, with a sign-definite eigenvector."""
    if spec.eigenvectors is None:
        raise ValueError("eigenvectors are required")
    mu = np.asarray(spec.eigenvalues)
    first = mu[0]
    real = abs(np.imag(first)) <= 1e-10 * max(1.0, abs(first))
    scale = max(1.0, float(np.max(np.abs(mu))))
    gap = float(np.real(mu[1]) - np.real(first)) if len(mu) > 1 else float("inf")
    simple = real and gap > 1e-8 * scale
    v = np.real(spec.eigenvectors[:, 0]) if real else np.abs(spec.eigenvectors[:, 0])
    vmax = np.max(np.abs(v))
    v = v if v[np.argmax(np.abs(v))] > 0 else -v
    sign_definite = bool(real and np.min(v) >= -1e-8 * vmax)
    return KreinRutmanReport(bool(simple), gap, sign_definite, bool(real), complex(first))


@dataclass(frozen=True)
class DualityRow:
    mu: complex
    beta: complex
    robin_residual: float


def duality_residuals(op: DtnOperator, count: int) -> list[DualityRow]:
    """For each of the ``count`` smallest DtN eigenvalues ``mu``, the Robin residual at ``beta = -mu``.

    ``w`` is the harmonic lift of the DtN eigenvector; the residual is
    ``|(K + beta Mb - lam M) w| / |w|`` divided by the matrix scale
    ``|K|_1 + |beta| |Mb|_1 + |lam| |M|_1``.
    """
    sys = op.system
    spec = dtn_spectrum(op, count)
    Mb = sys.boundary_mass(op.lumped_boundary_mass)
    nK, nM, nMb = (float(spla.norm(X, 1)) for X in (sys.K, sys.M, Mb))
    rows = []
    for k, mu in enumerate(spec.eigenvalues):
        phi = spec.eigenvectors[:, k]
        beta = -mu
        w = np.zeros(sys.n, dtype=np.result_type(phi, float))
        w[op.boundary_idx] = phi
        w[op.interior_idx] = -op.solve_interior(op._AIB @ phi.real)
        if np.iscomplexobj(phi):
            w[op.interior_idx] += -1j * op.solve_interior(op._AIB @ phi.imag)
        r = sys.K @ w + beta * (Mb @ w) - op.lam * (sys.M @ w)
        scale = nK + abs(beta) * nMb + abs(op.lam) * nM
        rows.append(DualityRow(mu, beta, float(np.linalg.norm(r) / (np.linalg.norm(w) * scale))))
    return rows
