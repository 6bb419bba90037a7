"""Acceptance criteria, one test each.

Each test records a PASS/FAIL line (printed in the terminal summary and to
stdout) and then asserts.  Criteria that cannot be met at desk scale are
marked xfail(strict=True): they still run in full and report FAIL.
"""
import math
import random
import time

import numpy as np
import pytest
from scipy import integrate

from conftest import ACCEPTANCE_LINES
from randspec import random_specs
from orbitcount import asym, pipeline, spectra
from orbitcount.curves import CountingCurve, fit
from orbitcount.errors import GridTooLarge, NonConvergent, UnsupportedStructure
from orbitcount.liealg import (LieAlgebra, SchrodingerSpec, base_point, build, discreteness,
                               is_gauge_invariant_pair, polarization, skew_form)
from orbitcount.orbit import orbit_space
from orbitcount.poly import MultiPoly
from orbitcount.scaling import classify, exact_limit, phi_star, psi_star, sublevel_curve

pytestmark = pytest.mark.acceptance


class Report:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.checks = []
        self.t0 = time.time()

    def check(self, name, ok, detail=""):
        self.checks.append((name, bool(ok), detail))

    def finish(self, budget):
        dt = time.time() - self.t0
        self.check(f"runtime {dt:.0f}s < {budget}s", dt < budget)
        ok = all(c[1] for c in self.checks)
        failed = [f"{n} [{d}]" if d else n for n, c, d in self.checks if not c]
        line = f"criterion {self.number} ({self.title}): {'PASS' if ok else 'FAIL'}"
        if failed:
            line += " -- failed: " + "; ".join(failed)
        ACCEPTANCE_LINES.append(line)
        print(line)
        for n, c, d in self.checks:
            print(f"    {'ok ' if c else 'BAD'} {n} {d}")
        assert ok, line


def jitter(lam):
    return lam * (1 + 1e-6)


def test_criterion_1_exact_algebra():
    r = Report(1, "exact algebra suite on 200 random specs")
    rng = random.Random(7)
    bad = {"jacobi": 0, "antisymmetry": 0, "closure": 0, "gauge": 0, "polarization": 0}
    for spec in random_specs(200, seed=1):
        g = build(spec)
        bad["jacobi"] += bool(g.jacobi_defects())
        bad["antisymmetry"] += bool(g.antisymmetry_defects())
        # closure: every bracket of basis elements lands in the algebra, and the
        # lower central series reaches zero (the algebra is nilpotent)
        lcs = g.lower_central_series()
        closed = all(k < g.dim for entry in g.table.values() for k in entry) and len(lcs[-1]) == 0
        bad["closure"] += not closed
        # gauge change a -> a + grad(phi) keeps V and B, hence the algebra
        phi = MultiPoly(spec.n, {tuple(rng.randint(0, 2) for _ in range(spec.n)): rng.randint(1, 3)})
        other = SchrodingerSpec(spec.n, tuple(a + phi.partial(j + 1) for j, a in enumerate(spec.a)), spec.V)
        same = is_gauge_invariant_pair(spec, other) and build(other).to_json() == g.to_json()
        bad["gauge"] += not same
        f = base_point(g)
        h = polarization(g, f)
        form = skew_form(g, f)
        radical = g.dim - form.rank
        ok = 2 * h.dim == g.dim + radical and g.is_ideal(h.basis)
        M = form.matrix
        ok = ok and all(sum(u[i] * M[i][j] * v[j] for i in range(g.dim) for j in range(g.dim)) == 0
                        for u in h.basis for v in h.basis)
        bad["polarization"] += not ok
    for k, v in bad.items():
        r.check(f"{k} identities", v == 0, f"{v} specs fail")
    r.finish(60)


def test_criterion_2_weyl_recovery():
    r = Report(2, "Weyl recovery, V = x1^2 + x2^2")
    spec = SchrodingerSpec.from_strings(2, V="x1^2+x2^2")
    lams = [100.0, 200.0, 400.0]
    dev = []
    for lam in lams:
        res = spectra.count_nd_direct(spec, jitter(lam), info=True)
        ratio = res.count / (lam * lam / 8)
        dev.append(abs(ratio - 1))
        r.check(f"N({lam:g})/(lam^2/8) within 3%", abs(ratio - 1) <= 0.03, f"{ratio:.4f} ({res.method})")
    r.check("deviation shrinks", dev[0] >= dev[1] >= dev[2], str(np.round(dev, 4)))
    st = pipeline.run(spec, validate=False)
    pred = asym.conjecture_rhs(spec, st.family, st.limit, lambdas=lams)
    for lam, v in zip(lams, pred.rhs_curve.values):
        r.check(f"RHS({lam:g}) = lam^2/8 within 0.5%", abs(v / (lam * lam / 8) - 1) <= 5e-3, f"{v:.2f}")
    r.finish(300)


def test_criterion_3_cdv_recovery():
    r = Report(3, "CdV recovery, b = x1^2 + x2^2 + 1")
    spec = SchrodingerSpec.from_field_2d("x1^2+x2^2+1")
    st = pipeline.run(spec, validate=False)
    lams = [50.0, 100.0]
    pred = asym.conjecture_rhs(spec, st.family, st.limit, lambdas=lams)
    for lam, v in zip(lams, pred.rhs_curve.values):
        w = spectra.weyl_cdv_integral(spec, lam)
        r.check(f"rhs/integral at {lam:g} within 1%", abs(v / w - 1) <= 0.01, f"{v:.3f} vs {w:.3f}")
    r.finish(120)


@pytest.mark.xfail(strict=True, reason="direct 2D counts for b = x1^2 - x2 over [20, 80] need > 3e7 "
                                       "lattice points; the spectral part is recorded as FAIL")
def test_criterion_4_inhomogeneous():
    r = Report(4, "inhomogeneous example b = x1^2 - x2")
    spec = SchrodingerSpec.from_field_2d("x1^2-x2")
    lams = list(np.geomspace(1e2, 1e6, 9))
    rep = classify(spec, lams, samples=10 ** 6, seed=0)
    f1, f2 = rep.fits
    r.check("G1 exponent 4 +- 0.1", abs(f1.a - 4) <= 0.1, f"{f1.a:.3f}")
    r.check("G2 exponent 5 +- 0.1", abs(f2.a - 5) <= 0.1, f"{f2.a:.3f}")
    at = np.array([1e3])
    g1 = sublevel_curve(phi_star(spec), at, 10 ** 6, 0).values[0] / (1e3 ** 4 / 3)
    g2 = sublevel_curve(psi_star(spec), at, 10 ** 6, 1).values[0] / (1e3 ** 5 / 5)
    r.check("G1(1e3) / (lam^4/3) within 10%", abs(g1 - 1) <= 0.1, f"{g1:.4f}")
    r.check("G2(1e3) / (lam^5/5) within 10%", abs(g2 - 1) <= 0.1, f"{g2:.4f}")
    st = pipeline.run(spec, validate=False, upto="limit")
    r.check("exact_limit (4, 0)", (st.limit.alpha, st.limit.beta) == (4, 0), f"{st.limit.alpha}, {st.limit.beta}")
    k1 = asym.kappa_inhomog(1e-2, info=True)
    k2 = asym.kappa_inhomog(5e-3, info=True)
    r.check("kappa(H) error estimate <= 1e-2", k1.error <= 1e-2 * k1.value, f"{k1.value:.5f} +- {k1.error:.1e}")
    r.check("kappa(H) stable when the tolerance halves", abs(k1.value - k2.value) <= 1e-2 * k2.value,
            f"{k2.value:.5f}")
    try:
        curve = CountingCurve()
        for lam in np.geomspace(20, 80, 5):
            curve.add(lam, spectra.count_masked(spec, jitter(lam), 4.0))
        fd = fit(curve, force_b=0, min_points=5, min_decades=0.5)
        r.check("direct exponent 3.5 +- 0.15", abs(fd.a - 3.5) <= 0.15, f"{fd.a:.3f}")
        ratio = curve.values / (k1.value * curve.lambdas ** 3.5)
        r.check("N / (kappa lam^3.5) in [0.5, 1.6], improving",
                0.5 <= ratio[-1] <= 1.6 and abs(ratio[-1] - 1) <= abs(ratio[0] - 1), str(np.round(ratio, 3)))
    except GridTooLarge as e:
        r.check("direct counts over [20, 80]", False, f"GridTooLarge: {e}")
    r.finish(1800)


def test_criterion_5_strong_family():
    r = Report(5, "strong family (k, l) = (2, 1)")
    spec = SchrodingerSpec.from_field_2d("x1^2*x2")
    st = pipeline.run(spec, validate=False)
    r.check("alpha = 3, beta = 0", (st.limit.alpha, st.limit.beta) == (3, 0), f"{st.limit.alpha}, {st.limit.beta}")
    lams = np.geomspace(4, 24, 7)
    direct = CountingCurve()
    for lam in lams:
        direct.add(lam, spectra.count_masked(spec, jitter(lam), 8.0), "masked")
    fd = fit(direct, force_b=0, min_points=6, min_decades=0.5)
    r.check("direct exponent 5/2 +- 0.15", abs(fd.a - 2.5) <= 0.15, f"{fd.a:.3f}")
    pred = asym.conjecture_rhs(spec, st.family, st.limit, lambdas=list(lams))
    rep = asym.compare(direct, pred, min_decades=0.5)
    r.check("compare verdict Consistent", rep.verdict == "Consistent",
            f"{rep.verdict}, ratios {np.round(rep.ratios, 3)}")
    r.finish(1200)


def test_criterion_6_intermediate_family():
    r = Report(6, "intermediate family k = 1, b = x1 x2")
    spec = SchrodingerSpec.from_field_2d("x1*x2")
    rep = classify(spec, list(np.geomspace(1e2, 1e6, 9)), samples=20000, seed=0)
    r.check("kappa estimate in [1.7, 2.3]", 1.7 <= rep.kappa <= 2.3, f"{rep.kappa:.3f} ({rep.classification})")
    st = pipeline.run(spec, validate=False, upto="limit")
    mu = st.limit
    r.check("exact_limit (3, 1)", (mu.alpha, mu.beta) == (3, 1), f"{mu.alpha}, {mu.beta}")
    dens = mu.density(np.array([[0.3, -1.7], [2.0, 0.1]]))
    r.check("limit density 2", np.allclose(dens, 2.0), str(dens))
    sc = asym.series_constant(1)
    r.check("series constant pi^2/8 within 1e-8", abs(sc - math.pi ** 2 / 8) <= 1e-8, f"{sc!r}")
    lams = np.geomspace(20, 60, 5)
    direct = CountingCurve()
    for lam in lams:
        direct.add(lam, spectra.count_masked(spec, jitter(lam), 4.0), "masked")
    fd = fit(direct, force_b=1, min_points=5, min_decades=0.4)
    r.check("forced b = 1 exponent 2 +- 0.2", abs(fd.a - 2) <= 0.2, f"{fd.a:.3f}")
    target = (2 / math.pi) * lams ** 2 * np.log(lams) * math.pi ** 2 / 8
    ratio = direct.values / target
    r.check("ratio in [0.5, 1.7] with improving trend",
            0.5 <= ratio[-1] <= 1.7 and abs(ratio[-1] - 1) <= abs(ratio[0] - 1), str(np.round(ratio, 3)))
    r.finish(1800)


def _xi_integral(b, d, lam):
    # int_{R^d} harmonic_count(b, |xi|^2, lam) dxi in polar coordinates
    sphere = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    R = math.sqrt(max(lam - sum(b), 0.0))
    if R == 0:
        return 0.0
    # breakpoints where a level crosses: |xi|^2 = lam - level
    levels = []
    stack = [(0, 0.0)]
    while stack:
        j, e = stack.pop()
        if j == len(b):
            levels.append(e)
            continue
        m = 0
        while e + (2 * m + 1) * b[j] <= lam:
            stack.append((j + 1, e + (2 * m + 1) * b[j]))
            m += 1
    pts = sorted({math.sqrt(lam - e) for e in levels if lam - e > 0})
    val, _ = integrate.quad(lambda r: r ** (d - 1) * spectra.harmonic_count(b, r * r, lam), 0, R,
                            points=pts[:-1] or None, limit=500, epsabs=0, epsrel=1e-11)
    return sphere * val


def test_criterion_7_spectral_identity():
    r = Report(7, "Landau sum = xi-integral of harmonic counts")
    rng = random.Random(3)
    worst = 0.0
    for _ in range(20):
        rk = rng.randint(1, 2)
        b = [rng.uniform(0.3, 2.0) for _ in range(rk)]
        d = rng.randint(1, 3)
        lam = rng.uniform(2.0, 25.0)
        a = spectra.landau_sum(b, d, lam)
        q = _xi_integral(b, d, lam)
        worst = max(worst, abs(a - q) / max(abs(a), 1e-300))
    r.check("20 random (b, d, lam) within 1e-6", worst <= 1e-6, f"worst rel {worst:.1e}")
    r.finish(60)


def test_criterion_8_three_dim_constant():
    r = Report(8, "3D constant, (k, l, p) = (2, 2, 1)")
    k1 = asym._kappa1(0.5)
    r.check("kappa_1(1/2) = 4/(3 pi) within 1e-10", abs(k1 - 4 / (3 * math.pi)) <= 1e-10, repr(k1))
    spec = SchrodingerSpec.from_strings(2, V="x1^4*x2^4")
    axes = spectra.reflection_axes(spec)
    lam0, lam1 = 25.0, 100.0
    low = spectra._symmetrize(spectra.masked_domain(spec, lam0, 4.0), axes)
    levels, _ = asym.extract_levels(spec, 10 ** 6, None, lam0, dom=low)
    high = spectra._symmetrize(spectra.masked_domain(spec, lam1, 4.0), axes)
    lams = np.geomspace(lam0, lam1, 45)
    counts = asym.sector_counts(spec, high, lams)
    res = asym.kappa_3d_series(2, 2, 1, levels, (lams, counts))
    r.check(">= 30 extracted levels", len(levels) >= 30, f"{len(levels)}")
    r.check("tail bound < 1%", res.tail_rel < 0.01,
            f"kappa = {res.value:.5f}, tail {res.tail_rel:.4f} (law {res.law['law_tail']:.2e}, "
            f"bracket {res.law['bracket_half_width']:.1e})")
    r.finish(1200)


def test_criterion_9_negative_controls():
    r = Report(9, "negative controls")
    r.check("discreteness(b = 1) is false", discreteness(SchrodingerSpec.from_field_2d("1")) is False)
    try:
        spectra.weyl_cdv_integral(SchrodingerSpec.from_field_2d("x1^2*x2^2"), 20.0)
        r.check("weyl_cdv_integral(b = x1^2 x2^2) NonConvergent", False, "returned a value")
    except NonConvergent:
        r.check("weyl_cdv_integral(b = x1^2 x2^2) NonConvergent", True)
    # 4-dim filiform algebra [X1,X2] = X3, [X1,X3] = X4: 3-step, derived algebra
    # not central, and no operator spec behind it
    table = {}
    for (i, j, k) in [(0, 1, 2), (0, 2, 3)]:
        table[(i, j)] = {k: 1}
        table[(j, i)] = {k: -1}
    g = LieAlgebra(("X1", "X2", "X3", "X4"), table,
                   tuple(tuple(1 if t == s else 0 for t in range(4)) for s in range(2)))
    try:
        orbit_space(g, None)
        r.check("orbit_space on a fabricated algebra reports UnsupportedStructure", False, "returned a family")
    except UnsupportedStructure:
        r.check("orbit_space on a fabricated algebra reports UnsupportedStructure", True)
    r.finish(60)
