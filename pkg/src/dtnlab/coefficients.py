"""Coefficient data (a, b, c, d, kappa) of the operator

    A u = -div(a grad u) + b . grad u - div(c u) + d u

plus the preset catalog and the side-condition margins under which the
DtN semigroup is positive.  Fields are vectorised callables of ``(x, y)`` arrays; vector
fields also carry their Jacobian so divergence and tangency can be checked
without finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from dtnlab.mesh import Mesh, boundary_normals

__all__ = [
    "MatrixField",
    "VectorField",
    "CoefficientSet",
    "ConditionMargins",
    "AdmissibilityReport",
    "CoefficientError",
    "preset",
    "PRESETS",
    "zero_field",
    "rotational_field",
    "stream_field",
    "check_admissibility",
    "check_conditions",
    "lambda1_lower_bounds",
    "sample_points",
    "sup_norm",
    "parse_config",
    "read_config",
]

# 3-point degree-2 rule on the reference triangle (barycentric coordinates).
QUAD_BARY = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
QUAD_WEIGHTS = np.full(3, 1 / 3)
# 2-point Gauss-Legendre on [0, 1].
EDGE_GAUSS = np.array([0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)])


class CoefficientError(ValueError):
    pass


@dataclass(frozen=True)
class MatrixField:
    """Symmetric 2x2 matrix field; ``value(x, y)`` returns shape (..., 2, 2)."""

    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    label: str
    constant: np.ndarray | None = None

    def __call__(self, x, y):
        return self.value(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    @classmethod
    def const(cls, a11: float, a12: float, a22: float, label: str | None = None) -> "MatrixField":
        mat = np.array([[a11, a12], [a12, a22]], dtype=float)

        def value(x, y):
            return np.broadcast_to(mat, np.shape(x) + (2, 2)).copy()

        return cls(value, label or f"const {a11!r} {a12!r} {a22!r}", mat)


@dataclass(frozen=True)
class VectorField:
    """2D vector field with Jacobian ``jac(x, y)[..., i, j] = d v_i / d x_j``."""

    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray, np.ndarray], np.ndarray]
    label: str
    is_zero: bool = False

    def __call__(self, x, y):
        return self.value(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def divergence(self, x, y):
        j = self.jac(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return j[..., 0, 0] + j[..., 1, 1]

    def scaled(self, s: float) -> "VectorField":
        return VectorField(
            lambda x, y: s * self.value(x, y),
            lambda x, y: s * self.jac(x, y),
            f"{s!r}*({self.label})",
            self.is_zero or s == 0,
        )


def zero_field() -> VectorField:
    return VectorField(
        lambda x, y: np.zeros(np.shape(x) + (2,)),
        lambda x, y: np.zeros(np.shape(x) + (2, 2)),
        "none",
        True,
    )


def rotational_field(s: float) -> VectorField:
    """s * (-y, x): divergence free and tangent to every circle about the origin."""

    def value(x, y):
        return s * np.stack([-y, x], axis=-1)

    def jac(x, y):
        out = np.zeros(np.shape(x) + (2, 2))
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
        return out

    return VectorField(value, jac, f"rotational {s!r}", s == 0)


def stream_field(s: float) -> VectorField:
    """s * (d psi/dy, -d psi/dx) for psi = sin(2 pi x) sin(2 pi y).

    psi vanishes on the boundary of the unit square, so the field is
    tangential there; it is divergence free as a rotated gradient.
    """
    k = 2.0 * np.pi

    def value(x, y):
        sx, cx = np.sin(k * x), np.cos(k * x)
        sy, cy = np.sin(k * y), np.cos(k * y)
        return s * k * np.stack([sx * cy, -cx * sy], axis=-1)

    def jac(x, y):
        sx, cx = np.sin(k * x), np.cos(k * x)
        sy, cy = np.sin(k * y), np.cos(k * y)
        out = np.empty(np.shape(x) + (2, 2))
        out[..., 0, 0] = s * k * k * cx * cy
        out[..., 0, 1] = -s * k * k * sx * sy
        out[..., 1, 0] = s * k * k * sx * sy
        out[..., 1, 1] = -s * k * k * cx * cy
        return out

    return VectorField(value, jac, f"stream {s!r}", s == 0)


@dataclass(frozen=True)
class CoefficientSet:
    a: MatrixField
    b: VectorField
    c: VectorField
    d: float
    kappa: float
    tags: frozenset = frozenset()
    metadata: dict = field(default_factory=dict)

    def d_field(self, x, y):
        return np.full(np.shape(x), float(self.d))

    @property
    def b_equals_c(self) -> bool:
        return self.b.label == self.c.label or (self.b.is_zero and self.c.is_zero)

    @property
    def divfree_tangential(self) -> bool:
        return "divfree_tangential" in self.tags

    def with_d(self, d: float) -> "CoefficientSet":
        meta = dict(self.metadata)
        meta["d"] = d
        return CoefficientSet(self.a, self.b, self.c, float(d), self.kappa, self.tags, meta)

    def describe(self) -> str:
        return f"a={self.a.label}; b={self.b.label}; c={self.c.label}; d={self.d!r}; kappa={self.kappa!r}"


def _identity(kappa: float = 1.0) -> MatrixField:
    return MatrixField.const(kappa, 0.0, kappa, "identity" if kappa == 1.0 else f"scaled_identity {kappa!r}")


PRESETS = ("laplace", "scaled_identity", "rotational", "stream", "skew_stream", "constant_d")


def preset(name: str, params=(), *, d: float | None = None, kappa: float | None = None) -> CoefficientSet:
    """Build a catalog coefficient set.

    ``name`` may combine presets with ``+``, e.g. ``"rotational+constant_d"``
    with ``params=[1.0, -1.0]``: parameters are consumed left to right.

    >>> preset("laplace").describe()
    'a=identity; b=none; c=none; d=0.0; kappa=1.0'
    """
    params = list(params)
    a = _identity()
    b = zero_field()
    c = zero_field()
    dval = 0.0
    kap = 1.0
    meta: dict = {"preset": name, "params": list(params)}
    tangential_on: set[str] = {"square", "disk"}
    for part in name.split("+"):
        part = part.strip()
        if part == "laplace":
            continue
        if part not in PRESETS:
            raise CoefficientError(f"unknown preset {part!r}; known: {', '.join(PRESETS)}")
        if not params:
            raise CoefficientError(f"preset {part!r} expects a parameter")
        if part == "scaled_identity":
            kap = float(params.pop(0))
            if kap <= 0:
                raise CoefficientError("scaled_identity needs kappa > 0")
            a = _identity(kap)
        elif part == "rotational":
            b = c = rotational_field(float(params.pop(0)))
            tangential_on &= {"disk"}
        elif part == "stream":
            b = c = stream_field(float(params.pop(0)))
            tangential_on &= {"square"}
        elif part == "skew_stream":
            b = stream_field(float(params.pop(0)))
            c = zero_field()
            tangential_on &= {"square"}
        elif part == "constant_d":
            dval = float(params.pop(0))
    if params:
        raise CoefficientError(f"unused preset parameters {params}")
    if d is not None:
        dval = float(d)
    if kappa is not None:
        kap = float(kappa)
    meta["geometry"] = sorted(tangential_on)
    return CoefficientSet(a, b, c, dval, kap, frozenset({"divfree_tangential"}), meta)


def sample_points(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Element quadrature points and boundary (2-point Gauss) quadrature points."""
    p = mesh.vertices[mesh.triangles]  # (nt, 3, 2)
    interior = np.einsum("qk,tkd->tqd", QUAD_BARY, p).reshape(-1, 2)
    a = mesh.vertices[mesh.boundary_edges[:, 0]]
    b = mesh.vertices[mesh.boundary_edges[:, 1]]
    boundary = (a[:, None, :] + EDGE_GAUSS[None, :, None] * (b - a)[:, None, :]).reshape(-1, 2)
    return interior, boundary


def sup_norm(field_values: np.ndarray) -> float:
    """Max Euclidean norm over sample points of an (..., 2) array."""
    if field_values.size == 0:
        return 0.0
    return float(np.max(np.hypot(field_values[..., 0], field_values[..., 1])))


@dataclass(frozen=True)
class AdmissibilityReport:
    symmetry_residual: float
    min_eig_a: float
    kappa_ok: bool
    div_b: float
    div_c: float
    normal_b: float
    normal_c: float
    tangential_ok: bool
    sup_abs_d: float

    @property
    def ok(self) -> bool:
        return self.kappa_ok and self.tangential_ok and math.isfinite(self.sup_abs_d)


def check_admissibility(coeffs: CoefficientSet, mesh: Mesh, tol: float = 1e-10) -> AdmissibilityReport:
    """Sample the coefficient invariants on ``mesh``.

    The tangential/divergence check uses the boundary Gauss points against
    the polygon normals.  On a polygonal disk the rotational field is
    tangent to the circle, not to the chords, so the normal component is
    instead measured at the boundary vertices against the radial direction
    (the normal of the curved domain the polygon approximates).
    """
    qi, qb = sample_points(mesh)
    pts = np.vstack([qi, qb, mesh.vertices])
    amat = coeffs.a(pts[:, 0], pts[:, 1])
    sym = float(np.max(np.abs(amat - np.swapaxes(amat, -1, -2)))) if len(pts) else 0.0
    eigs = np.linalg.eigvalsh(0.5 * (amat + np.swapaxes(amat, -1, -2)))
    min_eig = float(np.min(eigs))
    kappa_ok = sym <= 1e-12 and min_eig >= coeffs.kappa - 1e-12

    div_b = float(np.max(np.abs(coeffs.b.divergence(pts[:, 0], pts[:, 1]))))
    div_c = float(np.max(np.abs(coeffs.c.divergence(pts[:, 0], pts[:, 1]))))

    if mesh.shape == "disk":
        bp = mesh.vertices[mesh.boundary_nodes]
        normals = bp / np.hypot(bp[:, 0], bp[:, 1])[:, None]
    else:
        bp = qb
        normals = np.repeat(boundary_normals(mesh), len(EDGE_GAUSS), axis=0)
    nb = float(np.max(np.abs(np.sum(coeffs.b(bp[:, 0], bp[:, 1]) * normals, axis=-1))))
    nc = float(np.max(np.abs(np.sum(coeffs.c(bp[:, 0], bp[:, 1]) * normals, axis=-1))))
    tangential_ok = max(div_b, div_c, nb, nc) <= tol
    return AdmissibilityReport(sym, min_eig, kappa_ok, div_b, div_c, nb, nc, tangential_ok, abs(coeffs.d))


@dataclass(frozen=True)
class ConditionMargins:
    lam: float
    kappa: float
    norm_b_minus_c: float
    norm_b_plus_c: float
    norm_d_minus: float
    essinf_d: float
    lambda1D: float
    margin_a: float
    margin_b: float
    margin_c: float
    b_equals_c: bool
    standing_ok: bool = True  # a symmetric with bound kappa; b, c divergence-free and tangential

    @property
    def positivity_hypothesis(self) -> bool:
        return self.standing_ok and self.margin_a > 0

    @property
    def submarkov_hypothesis(self) -> bool:
        return self.standing_ok and self.margin_a > 0 and self.margin_b >= 0

    @property
    def irreducible_hypothesis(self) -> bool:
        return self.standing_ok and self.margin_c > 0

    @property
    def domination_hypothesis(self) -> bool:
        return self.standing_ok and self.margin_c > 0 and self.b_equals_c

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "kappa": self.kappa,
            "norm_b_minus_c": self.norm_b_minus_c,
            "norm_b_plus_c": self.norm_b_plus_c,
            "norm_d_minus": self.norm_d_minus,
            "essinf_d": self.essinf_d,
            "lambda1D": self.lambda1D,
            "margin_a": self.margin_a,
            "margin_b": self.margin_b,
            "margin_c": self.margin_c,
            "b_equals_c": self.b_equals_c,
            "standing_ok": self.standing_ok,
        }


def _sampled_norms(coeffs: CoefficientSet, mesh: Mesh) -> tuple[float, float, float, float]:
    qi, qb = sample_points(mesh)
    pts = np.vstack([qi, qb])
    bv = coeffs.b(pts[:, 0], pts[:, 1])
    cv = coeffs.c(pts[:, 0], pts[:, 1])
    dv = coeffs.d_field(pts[:, 0], pts[:, 1])
    return sup_norm(bv - cv), sup_norm(bv + cv), float(np.max(np.maximum(-dv, 0.0))), float(np.min(dv))


def check_conditions(coeffs: CoefficientSet, lam: float, lambda1D: float, mesh: Mesh) -> ConditionMargins:
    """Left-minus-right margins of the side conditions.

    Sup norms are maxima over the element and boundary quadrature points of
    ``mesh``; this under-approximates the true sup norm and converges
    under refinement.  ``standing_ok`` records the structural hypotheses
    (see :func:`check_admissibility`); the hypothesis flags require it.
    """
    if not lambda1D > 0:
        raise CoefficientError("lambda1D must be positive")
    bmc, bpc, dminus, dinf = _sampled_norms(coeffs, mesh)
    kap = coeffs.kappa
    margin_a = kap * lambda1D - (4.0 / kap * bmc**2 + dminus + lam)
    margin_c = kap * lambda1D - (dminus + lam)
    return ConditionMargins(
        lam=float(lam),
        kappa=kap,
        norm_b_minus_c=bmc,
        norm_b_plus_c=bpc,
        norm_d_minus=dminus,
        essinf_d=dinf,
        lambda1D=float(lambda1D),
        margin_a=margin_a,
        margin_b=dinf - lam,
        margin_c=margin_c,
        b_equals_c=bmc == 0.0,
        standing_ok=check_admissibility(coeffs, mesh).ok,
    )


def lambda1_lower_bounds(coeffs: CoefficientSet, lambda1D: float, mesh: Mesh) -> tuple[float | None, float | None]:
    """Lower bounds for the first Dirichlet eigenvalue of the form.

    Returns ``(bound_general, bound_tangential)``.  The general bound needs
    ``|b + c|_inf < kappa sqrt(lambda1D)``; the tangential one needs
    divergence-free fields tangent to the boundary of ``mesh`` (checked by
    sampling, see :func:`check_admissibility`).  ``None`` marks a bound
    that does not apply.
    """
    _, bpc, dminus, _ = _sampled_norms(coeffs, mesh)
    kap = coeffs.kappa
    root = math.sqrt(lambda1D)
    general = kap * lambda1D - bpc * root - dminus if bpc < kap * root else None
    tangential = None
    if coeffs.divfree_tangential and check_admissibility(coeffs, mesh).tangential_ok:
        tangential = kap * lambda1D - dminus
    return general, tangential


# -- config files -------------------------------------------------------------


def _parse_matrix(tokens: list[str]) -> MatrixField:
    kind = tokens[0]
    if kind == "identity" and len(tokens) == 1:
        return _identity()
    if kind == "diag" and len(tokens) == 3:
        kx, ky = map(float, tokens[1:])
        return MatrixField.const(kx, 0.0, ky, f"diag {kx!r} {ky!r}")
    if kind == "const" and len(tokens) == 4:
        return MatrixField.const(*map(float, tokens[1:]))
    raise CoefficientError(f"cannot parse matrix field {' '.join(tokens)!r}")


def _parse_vector(tokens: list[str]) -> VectorField:
    kind = tokens[0]
    if kind == "none" and len(tokens) == 1:
        return zero_field()
    if kind == "rotational" and len(tokens) == 2:
        return rotational_field(float(tokens[1]))
    if kind == "stream" and len(tokens) == 2:
        return stream_field(float(tokens[1]))
    raise CoefficientError(f"cannot parse vector field {' '.join(tokens)!r}")


def parse_config(text: str) -> CoefficientSet:
    """Parse the ``key = value`` coefficient format.

    Keys: ``a`` (identity | diag kx ky | const a11 a12 a22), ``b`` and ``c``
    (none | rotational s | stream s), ``d`` (const v), ``kappa`` (v).
    Missing keys default to the Laplacian.  ``#`` starts a comment.
    """
    values: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CoefficientError(f"line {lineno}: expected 'key = value'")
        key, rhs = (s.strip() for s in line.split("=", 1))
        if key not in {"a", "b", "c", "d", "kappa"}:
            raise CoefficientError(f"line {lineno}: unknown key {key!r}")
        tokens = rhs.split()
        if not tokens:
            raise CoefficientError(f"line {lineno}: empty value for {key!r}")
        values[key] = tokens

    a = _parse_matrix(values.get("a", ["identity"]))
    b = _parse_vector(values.get("b", ["none"]))
    c = _parse_vector(values.get("c", ["none"]))
    d_tokens = values.get("d", ["const", "0"])
    if d_tokens[0] == "const" and len(d_tokens) == 2:
        dval = float(d_tokens[1])
    elif len(d_tokens) == 1:
        dval = float(d_tokens[0])
    else:
        raise CoefficientError(f"cannot parse d {' '.join(d_tokens)!r}")
    if "kappa" in values:
        kap = float(values["kappa"][0])
    elif a.constant is not None:
        kap = float(np.min(np.linalg.eigvalsh(a.constant)))
    else:
        kap = 1.0
    if kap <= 0:
        raise CoefficientError("kappa must be positive")
    tags = frozenset({"divfree_tangential"}) if all(
        v[0] in {"none", "rotational", "stream"} for v in (values.get("b", ["none"]), values.get("c", ["none"]))
    ) else frozenset()
    return CoefficientSet(a, b, c, dval, kap, tags, {"source": "config"})


def read_config(path) -> CoefficientSet:
    with open(path) as fh:
        return parse_config(fh.read())
