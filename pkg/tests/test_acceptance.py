"""Acceptance gate: one test per criterion, each printing a single PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or ``python tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

from dtnlab import assembly, dtn, mesh, semigroup, spectral
from dtnlab.coefficients import check_conditions, lambda1_lower_bounds, preset

RESULTS: dict[str, str] = {}

TIMES = (0.01, 0.1, 1.0, 10.0)


def _record(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    RESULTS[name] = line
    print(line)
    return ok


# 1 ------------------------------------------------------------------------
def criterion_1():
    t0 = time.perf_counter()
    m = mesh.generate("disk", 0.05)
    op = dtn.build(assembly.assemble(m), 0.0)
    mu = spectral.dtn_spectrum(op, 5).eigenvalues
    elapsed = time.perf_counter() - t0
    ok = abs(mu[0]) <= 1e-6 and np.all(np.abs(mu[1:] - [1, 1, 2, 2]) <= 0.02) and elapsed < 60
    return ok, f"Steklov disk h={m.h:.4f}: mu={np.array2string(mu, precision=5)} in {elapsed:.1f}s"


# 2 ------------------------------------------------------------------------
def criterion_2():
    out = []
    ok = True
    for shape, exact, tol in (("square", 2 * math.pi**2, 0.01), ("disk", 5.7832, 0.02)):
        m = mesh.generate(shape, 0.05)
        l0 = spectral.lambda1_dirichlet(m)
        l1 = spectral.lambda1_dirichlet(mesh.refine(m))
        good = abs(l0 - exact) / exact <= tol and l1 < l0
        ok &= good
        out.append(f"{shape} {l0:.5f} -> {l1:.5f} (oracle {exact:.4f}, rel err {abs(l0 - exact) / exact:.2%})")
    return ok, "; ".join(out)


# 3 ------------------------------------------------------------------------
def criterion_3():
    worst = 0.0
    n = 0
    for shape, adv in (("square", "stream"), ("disk", "rotational")):
        m = mesh.generate(shape, 0.1)
        for name, params in (("laplace", []), (adv, [1.0]), ("skew_stream", [0.5])):
            s = assembly.assemble(m, preset(name, params))
            for lam in (-2.0, -1.0, 0.5):
                rows = spectral.duality_residuals(dtn.build(s, lam), 6)
                n += len(rows)
                worst = max(worst, max(r.robin_residual for r in rows))
    return worst <= 1e-8 and n == 2 * 3 * 3 * 6, f"{n} eigenvalues, worst scaled Robin residual {worst:.2e} (tol 1e-8)"


# 4 ------------------------------------------------------------------------
CATALOG = [
    ("laplace", []),
    ("scaled_identity", [2.0]),
    ("rotational", [0.5]),
    ("rotational", [1.0]),
    ("rotational", [2.0]),
    ("stream", [0.5]),
    ("stream", [1.0]),
    ("skew_stream", [0.2]),
    ("skew_stream", [0.3]),
    ("constant_d", [1.0]),
    ("constant_d", [-1.0]),
    ("rotational+constant_d", [1.0, 1.0]),
    ("stream+constant_d", [1.0, 2.0]),
]
LAMBDAS = (-2.0, -1.0, 0.0, 0.5)


def criterion_4():
    checked = {"positivity": 0, "submarkov": 0, "irreducible": 0}
    worst = {"positivity": math.inf, "submarkov": math.inf, "irreducible": math.inf}
    failures = []
    for shape, hmax in (("square", 0.1), ("disk", 0.1), ("square", 0.05), ("disk", 0.05)):
        # longest edge <= hmax (on the square the longest edge is the diagonal)
        m = mesh.generate(shape, hmax / math.sqrt(2) if shape == "square" else hmax)
        assert m.h <= hmax and mesh.is_delaunay(m)
        lam1 = spectral.lambda1_dirichlet(m)
        for name, params in CATALOG:
            s = assembly.assemble(m, preset(name, params), lumped_boundary_mass=True)
            for lam in LAMBDAS:
                mg = check_conditions(s.coeffs, lam, lam1, m)
                if not (mg.positivity_hypothesis or mg.irreducible_hypothesis):
                    continue
                op = dtn.build(s, lam)
                tag = f"{shape}/{name}{params}/lam={lam}"
                if mg.positivity_hypothesis:
                    r = semigroup.check_positivity(op, TIMES, 1e-8)
                    checked["positivity"] += 1
                    worst["positivity"] = min(worst["positivity"], r.worst_violation)
                    if r.verdict != "pass":
                        failures.append(f"positivity {tag} {r.worst_violation:.2e}")
                if mg.submarkov_hypothesis and mg.margin_b > 0:
                    r = semigroup.check_submarkov(op, TIMES, 1e-8)
                    checked["submarkov"] += 1
                    worst["submarkov"] = min(worst["submarkov"], r.worst_violation)
                    if r.verdict != "pass":
                        failures.append(f"submarkov {tag} {r.worst_violation:.2e}")
                if mg.irreducible_hypothesis:
                    r = semigroup.check_irreducible(op, 1.0, 1e-12)
                    checked["irreducible"] += 1
                    worst["irreducible"] = min(worst["irreducible"], r.details["min_over_max"])
                    if r.verdict != "pass":
                        failures.append(f"irreducible {tag} {r.details['min_over_max']:.2e}")
    detail = (f"lumped Mb, h in {{0.1, 0.05}}, configs checked {checked}; worst positivity {worst['positivity']:.2e}, "
              f"worst submarkov {worst['submarkov']:.2e}, smallest E(1) min/max {worst['irreducible']:.2e}")
    if failures:
        detail += "; failures: " + ", ".join(failures[:6])
    return not failures, detail


# 5 ------------------------------------------------------------------------
def criterion_5():
    m = mesh.generate("disk", 0.1)
    s = assembly.assemble(m, lumped_boundary_mass=True)
    op1 = dtn.build(s, 0.0)
    r_lam = semigroup.check_domination(dtn.build(s, -1.0), op1, TIMES, 1e-8, n_pairs=50, seed=0)
    r_d = semigroup.check_domination(dtn.build(s.with_d(1.0), 0.0), op1, TIMES, 1e-8, n_pairs=50, seed=0)
    ok = r_lam.verdict == "pass" and r_d.verdict == "pass"
    return ok, (f"lumped Mb; lambda2=-1<=lambda1=0: {r_lam.verdict} (min E1-E2 {r_lam.details['min_E1_minus_E2']:.2e}, "
                f"min E2 {r_lam.details['min_E2']:.2e}); d2=1>=d1=0: {r_d.verdict} "
                f"(form gap over 50 pairs {r_d.details['form_gap']:.2e})")


# 6 ------------------------------------------------------------------------
def criterion_6():
    m = mesh.generate("disk", 0.1)
    base = spectral.lambda1_dirichlet(m)
    ok = True
    parts = []
    for s in (0.5, 1.0, 2.0):
        c = preset("rotational", [s])
        val = spectral.lambda1_form(assembly.assemble(m, c))
        _, bt = lambda1_lower_bounds(c, base, m)
        rel = abs(val - base) / base
        ok &= rel <= 1e-8 and bt is not None and val >= bt - 1e-8 * base
        parts.append(f"s={s}: rel diff {rel:.1e}")
        cd = c.with_d(-1.0)
        _, btd = lambda1_lower_bounds(cd, base, m)
        ok &= btd is not None and btd - bt == -1.0
    return ok, f"lambda1D={base:.6f}; " + ", ".join(parts) + "; d=-1 bound shift exactly -1"


# 7 ------------------------------------------------------------------------
def criterion_7():
    s = assembly.assemble(mesh.generate("square", 0.1))
    lam1 = spectral.lambda1_form(s)
    try:
        dtn.build(s, lam1)
        hit = False
    except dtn.SpectrumHit:
        hit = True
    dtn.build(s, lam1 - 0.5)
    dtn.build(s, lam1 + 0.5)
    return hit, f"lambda1D(square h=0.1)={lam1:.6f}: SpectrumHit={hit}; lambda1D +/- 0.5 built"


# 8 ------------------------------------------------------------------------
def criterion_8():
    rng = np.random.default_rng(0)
    law = max(semigroup.semigroup_law_residual(rng.standard_normal((50, 50)), 0.3, 0.7) for _ in range(5))
    E0 = semigroup.expm_generator(rng.standard_normal((50, 50)), 0.0).E
    id_err = float(np.abs(E0 - np.eye(50)).max())
    m = mesh.generate("disk", 0.1)
    sym = max(
        semigroup.mb_symmetry_residual(dtn.build(assembly.assemble(m, preset(n, p), lumped_boundary_mass=lump), lam), t)
        for n, p in (("laplace", []), ("rotational", [1.0]))
        for lump in (False, True)
        for lam in (-1.0, 0.0)
        for t in (0.1, 1.0)
    )
    ok = law <= 1e-9 and id_err <= 1e-13 and sym <= 1e-9
    return ok, f"law residual {law:.1e}, |E(0)-I| {id_err:.1e}, Mb-symmetry {sym:.1e}"


CRITERIA = {
    "1 Steklov spectrum (disk)": criterion_1,
    "2 Dirichlet first eigenvalues": criterion_2,
    "3 Exact spectral duality": criterion_3,
    "4 Positivity/sub-Markov/irreducibility suite": criterion_4,
    "5 Domination": criterion_5,
    "6 lambda1D(a) bounds": criterion_6,
    "7 SpectrumHit behaviour": criterion_7,
    "8 Semigroup infrastructure": criterion_8,
}


@pytest.mark.parametrize("name", list(CRITERIA))
def test_acceptance(name):
    ok, detail = CRITERIA[name]()
    assert _record(name, ok, detail), detail


if __name__ == "__main__":
    status = 0
    for name, fn in CRITERIA.items():
        ok, detail = fn()
        _record(name, ok, detail)
        status |= not ok
    raise SystemExit(status)
