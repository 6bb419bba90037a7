import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import dvr_levels
from orbitcount import spectra as S
from orbitcount.errors import GridTooCoarse, NonConvergent
from orbitcount.liealg import SchrodingerSpec
from orbitcount.poly import parse


# --- closed forms ---------------------------------------------------------------

def test_count_1d_examples():
    assert S.count_1d(parse("x1^2", 1), 6.0) == 3
    assert S.count_1d(parse("x1^2", 1), 0.0) == 0
    assert S.count_1d(parse("x1^4", 1), 1.0) == 0


def test_count_1d_against_dvr():
    ev = dvr_levels(lambda x: x ** 4 + x ** 2, 6.0, 0.03, 60.0)
    for lam in (5.0, 20.0, 50.0):
        assert S.count_1d(parse("x1^4 + x1^2", 1), lam) == int(np.sum(ev < lam))


@pytest.mark.parametrize("b, shift, lam, expected", [
    ([1.0, 1.0], 0.0, 4.1, 3),
    ([1.0], 0.0, 1e3, 500),
    ([2.0, 3.0], 1.0, 6.0, 1),
])
def test_harmonic_count(b, shift, lam, expected):
    assert S.harmonic_count(b, shift, lam) == expected


def test_landau_sum():
    assert S.landau_sum([1.0], 1, 2.0) == pytest.approx(2.0)
    assert S.landau_sum([1.0], 2, 4.0) == pytest.approx(4 * math.pi)
    assert S.landau_sum([1.0], 2, 0.5) == 0.0


def test_cdv_density():
    assert S.cdv_density(np.array([[0, 1.0], [-1.0, 0]]), 4.0) == pytest.approx(1 / math.pi)
    assert S.cdv_density(np.zeros((2, 2)), 1.0) == pytest.approx(1 / (4 * math.pi))


def test_weyl_integral_harmonic():
    spec = SchrodingerSpec.from_strings(2, V="x1^2+x2^2")
    assert S.weyl_cdv_integral(spec, 100.0) == pytest.approx(1250.0, rel=5e-3)


@pytest.mark.parametrize("b", ["x1*x2", "x1^2*x2^2"])
def test_weyl_integral_diverges(b):
    with pytest.raises(NonConvergent):
        S.weyl_cdv_integral(SchrodingerSpec.from_field_2d(b), 20.0)


# --- direct counts -----------------------------------------------------------------

def test_harmonic_2d_count():
    spec = SchrodingerSpec.from_strings(2, V="x1^2+x2^2")
    assert S.count_nd_direct(spec, 4.1) == 3


def test_coarse_grid_rejected():
    spec = SchrodingerSpec.from_strings(2, V="x1^2+x2^2")
    with pytest.raises(GridTooCoarse):
        S.count_nd_direct(spec, 400.0, S.GridND((25.0, 25.0), (300, 300)))


@pytest.mark.parametrize("method", ["band", "sparse"])
@pytest.mark.parametrize("V, lam", [("x1^4*x2^4 + x1^2", 8.0), ("x1^4*x2^4 + x1^2", 30.0)])
def test_box_solvers_match_dense(method, V, lam):
    spec = SchrodingerSpec.from_strings(2, V=V)
    g = S.GridND((3.0, 3.0), (16, 12))
    assert S.count_nd_direct(spec, lam, g, check=False, method=method) == S.dense_count(spec, lam, g)


@pytest.mark.parametrize("method", ["band", "sparse"])
@pytest.mark.parametrize("lam", [3.0, 8.0, 15.0])
def test_magnetic_box_matches_dense(method, lam):
    spec = SchrodingerSpec.from_field_2d("1+x1^2+x2^2")
    g = S.GridND((3.0, 3.0), (14, 13))
    assert S.count_nd_direct(spec, lam, g, check=False, method=method) == S.dense_count(spec, lam, g)


def test_parity_sectors_sum():
    spec = SchrodingerSpec.from_strings(2, V="x1^4*x2^4")
    g = S.GridND((3.0, 3.0), (16, 14))
    for lam in (3.0, 8.0, 30.0):
        assert S.count_nd_direct(spec, lam, g, check=False, parity=True) == S.dense_count(spec, lam, g)


def test_separable_matches_band():
    spec = SchrodingerSpec.from_strings(2, V="x1^2+x2^2")
    g = S.GridND((3.0, 3.0), (16, 14))
    for lam in (3.0, 8.0, 30.0):
        assert S.count_nd_direct(spec, lam, g, check=False, method="separable") == S.dense_count(spec, lam, g)


# --- masked lattice --------------------------------------------------------------------

def masked_dense(spec, dom, lam, sec=None):
    diag, rows, cols, vals = S.masked_hamiltonian(spec, dom, sec)
    A = np.diag(diag).astype(complex)
    A[rows, cols] = vals
    A[cols, rows] = np.conj(vals)
    return int(np.sum(np.linalg.eigvalsh(A) < lam))


@pytest.mark.parametrize("b, lam", [("x1*x2", 6.0), ("x1^2*x2", 6.0), ("x1^2-x2", 3.0)])
def test_masked_routes_agree(b, lam):
    spec = SchrodingerSpec.from_field_2d(b)
    dom = S.masked_domain(spec, lam, 1.5, h=0.4)
    ref = masked_dense(spec, dom, lam)
    for solver in ("sparse", "envelope"):
        assert S.count_masked(spec, lam, dom=dom, solver=solver, symmetry=False) == ref
    # sectors only drop mirror-image stragglers of the mask
    sym = S._symmetrize(dom, S.reflection_axes(spec))
    ref_sym = masked_dense(spec, sym, lam)
    for solver in ("sparse", "envelope"):
        assert S.count_masked(spec, lam, dom=sym, solver=solver, symmetry=True) == ref_sym


def test_reflection_axes():
    assert S.reflection_axes(SchrodingerSpec.from_field_2d("x1*x2")) == [0, 1]
    assert S.reflection_axes(SchrodingerSpec.from_field_2d("x1^2*x2")) == [1]
    assert S.reflection_axes(SchrodingerSpec.from_field_2d("x1^2-x2")) == []


def test_masked_count_monotone_in_truncation():
    spec = SchrodingerSpec.from_field_2d("x1^2*x2")
    counts = [S.count_masked(spec, 5.0, c) for c in (1.0, 2.0, 4.0, 8.0)]
    assert counts == sorted(counts)


def test_gauge_invariance_of_masked_count():
    # b = x1 x2 in two gauges: a = (0, x1^2 x2 / 2) and a = (-x1 x2^2 / 2, 0)
    s1 = SchrodingerSpec.from_strings(2, ["0", "x1^2*x2/2"])
    s2 = SchrodingerSpec.from_strings(2, ["-x1*x2^2/2", "0"])
    dom = S.masked_domain(s1, 6.0, 1.5, h=0.4)
    assert masked_dense(s1, dom, 6.0) == masked_dense(s2, dom, 6.0)


@settings(max_examples=10, deadline=None)
@given(st.floats(1.0, 8.0), st.floats(0.0, 3.0))
def test_masked_count_monotone_in_lambda(lam, dlam):
    spec = SchrodingerSpec.from_field_2d("x1*x2")
    dom = S.masked_domain(spec, 11.0, 1.5, h=0.4)
    assert S.count_masked(spec, lam, dom=dom) <= S.count_masked(spec, lam + dlam, dom=dom)
