import math

import numpy as np
import pytest

from oracles import dvr_levels, kappa_inhomog_oracle, kappa_strong_oracle
from orbitcount import asym, pipeline, spectra
from orbitcount.curves import CountingCurve, fit
from orbitcount.errors import InsufficientSpan
from orbitcount.liealg import SchrodingerSpec

# frozen outputs of the sinc-DVR oracles in tests/oracles.py (B = 400)
KAPPA_INHOMOG_ORACLE = 0.50925
KAPPA_STRONG_21_ORACLE = 1.10262


def test_kappa_inhomog_matches_oracle():
    est = asym.kappa_inhomog(1e-2, info=True)
    assert est.value == pytest.approx(KAPPA_INHOMOG_ORACLE, rel=2e-3)
    assert est.error <= 1e-2 * est.value


def test_kappa_strong_matches_oracle():
    assert asym.kappa_strong(2, 1) == pytest.approx(KAPPA_STRONG_21_ORACLE, rel=2e-3)


@pytest.mark.slow
def test_oracles_reproduce_frozen_values():
    assert kappa_inhomog_oracle() == pytest.approx(KAPPA_INHOMOG_ORACLE, abs=5e-5)
    assert kappa_strong_oracle(2, 1) == pytest.approx(KAPPA_STRONG_21_ORACLE, abs=5e-5)


def test_kappa_tolerance_floor():
    with pytest.raises(ValueError):
        asym.kappa_inhomog(1e-4)


def test_series_constant():
    assert asym.series_constant(1) == pytest.approx(math.pi ** 2 / 8, abs=1e-10)
    # partial sums approach from below; k = 4 is finite
    j = np.arange(200000, dtype=float)
    assert asym.series_constant(4) > float(np.sum((2 * j + 1) ** -1.25))


def test_kappa1():
    assert asym._kappa1(0.5) == pytest.approx(4 / (3 * math.pi), abs=1e-12)
    # alpha = 1/5: (5/pi) B(5/2, 3/2) = (5/pi)(pi/16)
    assert asym.kappa1_3d(2, 2, 1) == pytest.approx(5 / 16, abs=1e-12)
    with pytest.raises(ValueError):
        asym.kappa1_3d(1, 1, 1)


def test_level_measure_harmonic():
    # {(a, beta) : ground level of -d^2 + (z^2 + beta)^2 ...}: compare against the closed scale law
    big = asym.level_measure(1.0, 2, 100.0)
    assert big == pytest.approx(math.pi ** 2 * 100 ** 2 / 16, rel=0.05)


def test_min_ground_level_against_dvr():
    E0 = asym.min_ground_level(1.0, 2)
    betas = np.linspace(-3, 1, 41)
    ref = min(dvr_levels(lambda z: (z * z + b) ** 2, 6.0, 0.02, 50.0)[0] for b in betas)
    assert E0 <= ref + 1e-6
    assert E0 == pytest.approx(ref, rel=2e-3)


def test_series_with_synthetic_levels():
    # levels of a law N = lam^(5/4) log lam: the tail estimate is positive and bounded
    lv = []
    for j in range(1, 200):
        lo, hi = 1.01, 1e4
        for _ in range(80):
            m = math.sqrt(lo * hi)
            lo, hi = (m, hi) if m ** 1.25 * math.log(m) < j else (lo, m)
        lv.append(lo)
    res = asym.kappa_3d_series(2, 2, 1, lv)
    assert 0 < res.tail < res.partial


def test_series_count_bracket():
    lv = [2.0, 3.0, 5.0]
    lams = np.array([6.0, 8.0, 12.0])
    res = asym.kappa_3d_series(2, 2, 1, lv, (lams, np.array([3, 5, 9])))
    s = 2.5
    lo = sum(x ** -s for x in lv) + 2 * 8 ** -s + 4 * 12 ** -s
    hi = sum(x ** -s for x in lv) + 2 * 6 ** -s + 4 * 8 ** -s
    assert res.partial == pytest.approx(0.5 * (lo + hi))
    assert res.law["bracket_half_width"] == pytest.approx(0.5 * (hi - lo))


def test_swap_sectors():
    spec = SchrodingerSpec.from_strings(2, V="x1^4*x2^4")
    secs = asym.swap_sectors(spec)
    assert sum(m for _, m in secs) == 4 and len(secs) == 3


def test_extract_levels_on_mask():
    spec = SchrodingerSpec.from_strings(2, V="x1^2+x2^2")
    dom = spectra._symmetrize(spectra.masked_domain(spec, 7.0, 4.0), spectra.reflection_axes(spec))
    lv, _ = asym.extract_levels(spec, 6, None, 7.0, dom=dom)
    # harmonic levels 2, 4, 4, 6, 6, 6 up to the lattice error
    assert np.allclose(lv, [2, 4, 4, 6, 6, 6], rtol=0.03)


# --- fit and compare -----------------------------------------------------------------

def curve_of(lams, f):
    c = CountingCurve()
    for l in lams:
        c.add(l, f(l))
    return c


def test_fit_exact_models():
    lams = np.geomspace(10, 1e4, 8)
    r = fit(curve_of(lams, lambda l: 2 * l ** 3))
    assert (r.C, r.a, r.b) == (pytest.approx(2, rel=1e-6), pytest.approx(3, abs=1e-6), 0)
    r = fit(curve_of(lams, lambda l: l ** 2 * math.log(l)))
    assert (r.C, r.a, r.b) == (pytest.approx(1, rel=1e-6), pytest.approx(2, abs=1e-6), 1)


def test_fit_span_guard():
    with pytest.raises(InsufficientSpan):
        fit(curve_of(np.geomspace(10, 20, 8), lambda l: l))


def test_compare_weyl_harmonic():
    spec = SchrodingerSpec.from_strings(2, V="x1^2+x2^2")
    st = pipeline.run(spec, validate=False)
    lams = [25.0, 50.0, 100.0, 200.0, 400.0, 800.0]
    pred = asym.conjecture_rhs(spec, st.family, st.limit, lambdas=lams)
    direct = curve_of(lams, lambda l: spectra.harmonic_count([1.0, 1.0], 0.0, l * (1 + 1e-6)))
    rep = asym.compare(direct, pred, min_decades=1.0)
    assert abs(rep.ratios[lams.index(400.0)] - 1) <= 0.02
    assert rep.verdict == "Consistent"


def test_compare_mismatch_inconsistent():
    lams = list(np.geomspace(10, 1e4, 8))
    direct = curve_of(lams, lambda l: l ** 2)
    pred = curve_of(lams, lambda l: l ** 3)
    assert asym.compare(direct, pred).verdict == "Inconsistent"


def test_ratio_band_counts_as_improving():
    lams = list(np.geomspace(10, 1e3, 8))
    direct = curve_of(lams, lambda l: l ** 2 * (1 + 0.005 * math.log(l)))
    pred = curve_of(lams, lambda l: l ** 2)
    rep = asym.compare(direct, pred, min_decades=1.0)
    assert rep.improving and rep.verdict == "Consistent"


def test_conjecture_intermediate_limit():
    spec = SchrodingerSpec.from_field_2d("x1*x2")
    st = pipeline.run(spec, validate=False)
    lams = [1e3, 1e4]
    pred = asym.conjecture_rhs(spec, st.family, st.limit, lambdas=lams, kappa=2.0)
    target = [(2 / math.pi) * l ** 2 * math.log(l) * math.pi ** 2 / 8 for l in lams]
    r = np.array(pred.rhs_curve.values) / np.array(target)
    assert np.all(np.abs(r - 1) < 0.1)
