"""``dtn`` command-line front end.

Every subcommand accepts either ``--mesh FILE`` or ``--shape {square,disk} --h H``
and either ``--coeff FILE`` or ``--preset NAME[:p1,p2,...]`` (default ``laplace``).
Exit codes: 0 success, 2 a computed property failed, 1 the computation
could not be carried out.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dtnlab import assembly, dtn, io, mesh as meshmod, semigroup, spectral
from dtnlab.coefficients import CoefficientError, CoefficientSet, preset, read_config

log = logging.getLogger("dtnlab")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PROPERTY_FAIL = 2

_CHECKS = ("positivity", "submarkov", "irreducible")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # Argument errors are plumbing failures: exit 1, not argparse's default 2.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated reals, got {text!r}") from exc


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text!r}")
    return v


# ---------------------------------------------------------------- inputs


def load_mesh(args) -> meshmod.Mesh:
    if args.mesh and args.shape:
        raise UsageError("--mesh and --shape are mutually exclusive")
    if args.mesh:
        m = meshmod.read_mesh(args.mesh)
    elif args.shape:
        m = meshmod.generate(args.shape, args.h)
    else:
        raise UsageError("give --mesh FILE or --shape {square,disk} [--h H]")
    for _ in range(args.refine):
        m = meshmod.refine(m)
    return m


def parse_preset(spec: str) -> CoefficientSet:
    """``name[:p1,p2]``, e.g. ``rotational:1`` or ``stream+constant_d:1,-1``."""
    name, _, params = spec.partition(":")
    return preset(name, _floats(params) if params else ())


def load_coeffs(args) -> CoefficientSet:
    if args.coeff and args.preset:
        raise UsageError("--coeff and --preset are mutually exclusive")
    coeffs = read_config(args.coeff) if args.coeff else parse_preset(args.preset or "laplace")
    if getattr(args, "d", None) is not None:
        coeffs = coeffs.with_d(args.d)
    return coeffs


def load_system(args) -> assembly.AssembledSystem:
    m = load_mesh(args)
    return assembly.assemble(m, load_coeffs(args), lumped_boundary_mass=args.lumped_boundary_mass)


# ---------------------------------------------------------------- output helpers


def _fmt(x) -> str:
    return io.format_real(float(x))


def _fmt_complex(z: complex) -> str:
    if z.imag == 0:
        return _fmt(z.real)
    return f"{_fmt(z.real)}{'+' if z.imag >= 0 else '-'}{_fmt(abs(z.imag))}j"


def _csv(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v) for v in r))
    return "\n".join(lines) + "\n"


def _emit(text: str, out) -> None:
    if out:
        io.atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------- subcommands


def cmd_mesh(args) -> int:
    m = load_mesh(args)
    meshmod.validate(m)
    if args.out:
        meshmod.write_mesh(m, args.out)
    print(f"shape={m.shape} vertices={m.n_vertices} triangles={m.n_triangles} "
          f"boundary_edges={m.n_boundary_edges} h={_fmt(m.h)} delaunay={meshmod.is_delaunay(m)}")
    if args.plot:
        from dtnlab.plotting import plot_mesh

        plot_mesh(m, args.plot)
    return EXIT_OK


def cmd_assemble(args) -> int:
    s = load_system(args)
    prefix = args.out_prefix
    io.write_mtx(f"{prefix}K.mtx", s.K, "operator form K[i,j] = a(phi_j, phi_i)")
    io.write_mtx(f"{prefix}M.mtx", s.M, "mass matrix")
    io.write_mtx(f"{prefix}Mb.mtx", s.Mb, "boundary mass matrix" + (" (lumped)" if s.lumped_boundary_mass else ""))
    io.write_partition(f"{prefix}partition.txt", s.interior_idx, s.boundary_idx)
    print(f"n={s.n} interior={len(s.interior_idx)} boundary={len(s.boundary_idx)} prefix={prefix}")
    if args.plot:
        from dtnlab.plotting import plot_mesh

        plot_mesh(s.mesh, args.plot)
    return EXIT_OK


def _mb_path(out: str) -> Path:
    p = Path(out)
    return p.with_name("Mb.mtx") if p.stem == "S" else p.with_name(p.stem + ".Mb.mtx")


def cmd_operator(args) -> int:
    s = load_system(args)
    op = dtn.build(s, args.lam, args.pivot_tol)
    io.write_mtx(args.out, op.S, f"Schur complement S(lambda={_fmt(op.lam)}), boundary order of the partition")
    mb_out = args.mb_out or _mb_path(args.out)
    io.write_mtx(mb_out, op.Mb_bb, "boundary Gram matrix on boundary nodes")
    print(f"m={op.m} lambda={_fmt(op.lam)} cond_estimate={_fmt(op.cond_estimate)} S={args.out} Mb={mb_out}")
    if args.plot:
        from dtnlab.plotting import plot_spectrum

        spec = spectral.dtn_spectrum(op, min(op.m, 20))
        plot_spectrum(spec.eigenvalues, args.plot, f"DtN eigenvalues, lambda = {op.lam:g}")
    return EXIT_OK


def cmd_duality(args) -> int:
    s = load_system(args)
    op = dtn.build(s, args.lam, args.pivot_tol)
    rows = spectral.duality_residuals(op, args.count)
    out = []
    worst = 0.0
    for r in rows:
        mu, beta = complex(r.mu), complex(r.beta)
        cells = [_fmt_complex(mu), _fmt_complex(beta), _fmt(r.robin_residual)]
        out.append(cells)
        worst = max(worst, r.robin_residual)
    _emit(_csv(["mu", "beta", "robin_residual"], out), args.out)
    if args.plot:
        from dtnlab.plotting import plot_spectrum

        plot_spectrum([r.mu for r in rows], args.plot, f"DtN eigenvalues, lambda = {op.lam:g}")
    if worst > args.tol:
        log.error("largest Robin residual %.3e exceeds tol %.1e", worst, args.tol)
        return EXIT_PROPERTY_FAIL
    return EXIT_OK


def cmd_eig(args) -> int:
    s = load_system(args)
    if args.problem == "dirichlet":
        spec = spectral.dirichlet_spectrum(s, args.count)
    elif args.problem == "robin":
        spec = spectral.robin_spectrum(s, args.beta, args.count)
    else:
        spec = spectral.dtn_spectrum(dtn.build(s, args.lam, args.pivot_tol), args.count)
    mu = np.asarray(spec.eigenvalues)
    res = spec.residual_norms / spec.scale
    rows = [[str(k), np.real(mu[k]), np.imag(mu[k]) if np.iscomplexobj(mu) else 0.0, res[k]] for k in range(len(mu))]
    _emit(_csv(["index", "re", "im", "residual"], rows), args.out)
    if args.plot:
        from dtnlab.plotting import plot_spectrum

        plot_spectrum(mu, args.plot, f"{spec.problem_tag} eigenvalues")
    return EXIT_OK


def cmd_semigroup(args) -> int:
    s = load_system(args)
    op = dtn.build(s, args.lam, args.pivot_tol)
    reports = []
    for name in args.check:
        if name == "positivity":
            r = semigroup.check_positivity(op, args.times, args.tol)
        elif name == "submarkov":
            r = semigroup.check_submarkov(op, args.times, args.tol)
        else:
            r = semigroup.check_irreducible(op, args.t_probe, args.irreducible_tol)
        reports.append(r)
    doc = {
        "lambda": op.lam,
        "coefficients": s.coeffs.describe(),
        "mesh": {"shape": s.mesh.shape, "h": s.mesh.h, "vertices": s.mesh.n_vertices},
        "lumped_boundary_mass": op.lumped_boundary_mass,
        "reports": [r.as_dict() for r in reports],
    }
    _emit(_json(doc), args.out)
    if args.plot:
        from dtnlab.plotting import plot_semigroup

        t = max(args.times)
        plot_semigroup(semigroup.expm_generator(op, t).E, args.plot, t)
    return EXIT_PROPERTY_FAIL if any(r.verdict == "fail" for r in reports) else EXIT_OK


def cmd_dominate(args) -> int:
    base = load_system(args)
    d1 = base.coeffs.d if args.d1 is None else args.d1
    d2 = base.coeffs.d if args.d2 is None else args.d2
    s1 = base if d1 == base.coeffs.d else base.with_d(d1)
    s2 = base if d2 == base.coeffs.d else base.with_d(d2)
    op1 = dtn.build(s1, args.lambda1, args.pivot_tol)
    op2 = dtn.build(s2, args.lambda2, args.pivot_tol)
    r = semigroup.check_domination(op2, op1, args.times, args.tol, n_pairs=args.pairs, seed=args.seed)
    doc = r.as_dict()
    doc["lambda1"], doc["lambda2"], doc["d1"], doc["d2"] = op1.lam, op2.lam, float(d1), float(d2)
    _emit(_json(doc), args.out)
    if args.plot:
        from dtnlab.plotting import plot_semigroup

        t = max(args.times)
        E1 = semigroup.expm_generator(op1, t).E
        E2 = semigroup.expm_generator(op2, t).E
        plot_semigroup(E1 - E2, args.plot, t, title=f"E1 - E2 at t = {t:g}")
    return EXIT_PROPERTY_FAIL if r.verdict == "fail" else EXIT_OK


# ---------------------------------------------------------------- sweep


@dataclass
class SweepResult:
    rows: list  # (lambda, k, re_mu, im_mu) in grid order
    skipped: list  # lambdas that hit the Dirichlet spectrum
    monotone: bool | None  # None when not checked (b != c)
    violations: list = field(default_factory=list)
    segments: dict = field(default_factory=dict)  # lambda -> number of Dirichlet eigenvalues below it

    def report(self) -> dict:
        return {
            "points": len({r[0] for r in self.rows}),
            "skipped": self.skipped,
            "monotone_decreasing": self.monotone,
            "violations": self.violations,
        }


def _sweep_point(sysm, lam, count, pivot_tol):
    try:
        op = dtn.build(sysm, lam, pivot_tol)
    except dtn.SpectrumHit as exc:
        return lam, None, str(exc)
    return lam, spectral.dtn_spectrum(op, count).eigenvalues, None


def sweep(
    sysm: assembly.AssembledSystem,
    lambda_min: float,
    lambda_max: float,
    steps: int,
    count: int,
    *,
    pivot_tol: float = dtn.DEFAULT_PIVOT_TOL,
    workers: int | None = None,
    mono_tol: float = 1e-9,
) -> SweepResult:
    """DtN eigenvalue branches ``mu_k(lambda)`` on a uniform grid.

    Points are evaluated concurrently and assembled in grid order.  Grid
    points in the Dirichlet spectrum are skipped.  In the self-adjoint case
    each branch is checked to be decreasing between consecutive Dirichlet
    eigenvalues, located by inertia counts of the interior pencil.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    grid = np.linspace(lambda_min, lambda_max, steps + 1) if steps > 1 or lambda_min != lambda_max else np.array([lambda_min])
    grid = [float(x) for x in grid]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda lam: _sweep_point(sysm, lam, count, pivot_tol), grid))
    rows, skipped, good = [], [], []
    for lam, mu, err in results:
        if mu is None:
            log.warning("skipping lambda=%r: %s", lam, err)
            skipped.append(lam)
            continue
        good.append((lam, mu))
        for k, v in enumerate(mu):
            rows.append((lam, k, float(np.real(v)), float(np.imag(v)) if np.iscomplexobj(mu) else 0.0))
    if not good:
        raise ArithmeticError("every grid point lies in the Dirichlet spectrum")

    res = SweepResult(rows, skipped, None)
    if not sysm.symmetric:
        return res
    KII, MII = assembly.dirichlet_blocks(sysm)
    res.segments = {lam: spectral.count_below(KII, MII, lam) for lam, _ in good}
    res.monotone = True
    for (l0, m0), (l1, m1) in zip(good, good[1:]):
        if res.segments[l0] != res.segments[l1]:
            continue
        n = min(len(m0), len(m1))
        for k in range(n):
            a, b = float(np.real(m0[k])), float(np.real(m1[k]))
            if b > a + mono_tol * max(1.0, abs(a)):
                res.monotone = False
                res.violations.append({"k": k, "lambda_from": l0, "lambda_to": l1, "increase": b - a})
    return res


def cmd_sweep(args) -> int:
    s = load_system(args)
    r = sweep(s, args.lambda_min, args.lambda_max, args.steps, args.count, pivot_tol=args.pivot_tol, workers=args.workers)
    _emit(_csv(["lambda", "k", "re_mu", "im_mu"], [(a, str(k), c, d) for a, k, c, d in r.rows]), args.out)
    if args.report:
        io.atomic_write_text(args.report, _json(r.report()))
    if r.monotone is None:
        log.info("monotonicity not checked: b != c")
    else:
        log.info("branches monotone decreasing between Dirichlet eigenvalues: %s", r.monotone)
    if args.plot:
        from dtnlab.plotting import plot_sweep

        plot_sweep(r.rows, args.plot, poles=r.skipped)
    return EXIT_PROPERTY_FAIL if r.monotone is False else EXIT_OK


# ---------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser, *, coeffs: bool = True) -> None:
    g = p.add_argument_group("mesh source")
    g.add_argument("--mesh", help="mesh file (DTNMESH format)")
    g.add_argument("--shape", choices=("square", "disk"), help="generate a mesh of this shape")
    g.add_argument("--h", type=_positive, default=0.1, help="target mesh size for --shape (default 0.1)")
    g.add_argument("--refine", type=int, default=0, help="uniform refinements applied after loading")
    if coeffs:
        c = p.add_argument_group("coefficients")
        c.add_argument("--coeff", help="coefficient config file")
        c.add_argument("--preset", help="catalog preset NAME[:p1,p2,...] (default laplace)")
        c.add_argument("--d", type=float, help="override the constant reaction coefficient")
        c.add_argument("--lumped-boundary-mass", action="store_true", help="use the lumped boundary mass matrix")
        c.add_argument("--pivot-tol", type=_positive, default=dtn.DEFAULT_PIVOT_TOL)
    p.add_argument("--seed", type=int, default=0, help="seed for random-vector checks")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p.add_argument("--plot", help="write a PNG figure to this path")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dtn", description=__doc__.splitlines()[0], allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mesh", help="generate and write a mesh", allow_abbrev=False)
    _common(p, coeffs=False)
    p.add_argument("--out")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("assemble", help="write K, M, Mb and the node partition", allow_abbrev=False)
    _common(p)
    p.add_argument("--out-prefix", default="", help="prefix for K.mtx, M.mtx, Mb.mtx, partition.txt")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("operator", help="export the Schur complement S(lambda) and Mb", allow_abbrev=False)
    _common(p)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--out", default="S.mtx")
    p.add_argument("--mb-out", help="path for the boundary mass (default: next to --out)")
    p.set_defaults(func=cmd_operator)

    p = sub.add_parser("duality", help="Robin residuals at beta = -mu for DtN eigenvalues", allow_abbrev=False)
    _common(p)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--count", type=int, default=6)
    p.add_argument("--tol", type=_positive, default=1e-8)
    p.add_argument("--out")
    p.set_defaults(func=cmd_duality)

    p = sub.add_parser("eig", help="Dirichlet, Robin or DtN eigenvalues", allow_abbrev=False)
    _common(p)
    p.add_argument("--problem", choices=("dirichlet", "robin", "dtn"), default="dtn")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--count", type=int, default=6)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eig)

    p = sub.add_parser("semigroup", help="order properties of exp(-t D)", allow_abbrev=False)
    _common(p)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--times", type=_floats, default=list(semigroup.DEFAULT_TIMES))
    p.add_argument("--check", type=lambda s: [c.strip() for c in s.split(",") if c.strip()], default=list(_CHECKS))
    p.add_argument("--tol", type=_positive, default=1e-8)
    p.add_argument("--t-probe", type=_positive, default=1.0, help="time for the irreducibility probe")
    p.add_argument("--irreducible-tol", type=_positive, default=1e-12)
    p.add_argument("--out")
    p.set_defaults(func=cmd_semigroup)

    p = sub.add_parser("dominate", help="domination of exp(-t D_2) by exp(-t D_1)", allow_abbrev=False)
    _common(p)
    p.add_argument("--lambda1", type=float, default=0.0)
    p.add_argument("--lambda2", type=float, default=0.0)
    p.add_argument("--d1", type=float)
    p.add_argument("--d2", type=float)
    p.add_argument("--times", type=_floats, default=list(semigroup.DEFAULT_TIMES))
    p.add_argument("--tol", type=_positive, default=1e-8)
    p.add_argument("--pairs", type=int, default=50)
    p.add_argument("--out")
    p.set_defaults(func=cmd_dominate)

    p = sub.add_parser("sweep", help="DtN eigenvalue branches over a lambda grid", allow_abbrev=False)
    _common(p)
    p.add_argument("--lambda-min", type=float, default=-5.0)
    p.add_argument("--lambda-max", type=float, default=5.0)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--count", type=int, default=6)
    p.add_argument("--workers", type=int, help="thread count (default: executor default)")
    p.add_argument("--out")
    p.add_argument("--report", help="write the monotonicity report as JSON")
    p.set_defaults(func=cmd_sweep)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if getattr(args, "check", None):
        bad = [c for c in args.check if c not in _CHECKS]
        if bad:
            print(f"dtn: error: unknown check(s) {bad}; choose from {list(_CHECKS)}", file=sys.stderr)
            return EXIT_ERROR
    try:
        return args.func(args)
    except dtn.SpectrumHit as exc:
        print(f"dtn: error: {exc} (lambda={exc.lam!r})", file=sys.stderr)
    except (UsageError, CoefficientError, meshmod.MeshError, assembly.AssemblyError, meshmod.ResourceLimitError,
            spectral.EigenError, OverflowError, ArithmeticError, OSError, ValueError) as exc:
        print(f"dtn: error: {exc}", file=sys.stderr)
    return EXIT_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
