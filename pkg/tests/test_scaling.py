import math
from fractions import Fraction

import numpy as np
import pytest

from orbitcount import pipeline
from orbitcount.liealg import SchrodingerSpec
from orbitcount.poly import parse
from orbitcount.scaling import (classify, dilation_weights, exact_limit, mc_growth, phi_star, psi_star,
                                sublevel_curve)

LAMS = list(np.geomspace(1e2, 1e6, 9))


def test_phi_star_inhomogeneous():
    star = phi_star(SchrodingerSpec.from_field_2d("x1^2-x2"))
    assert star.describe() == "|-x1^2 + x2|^(1/2) + |1|^(1/2) + |-2*x1|^(1/2) + |-2|^(1/2)"


def test_psi_star_harmonic():
    star = psi_star(SchrodingerSpec.from_strings(1, V="x1^2"))
    assert [t[2] for t in star.terms] == [Fraction(1, 2), Fraction(1, 3), Fraction(1, 4)]
    assert star.describe() == "|x1^2|^(1/2) + |2*x1|^(1/3) + |2|^(1/4)"


def test_mc_interval():
    c = mc_growth([parse("x1", 1)], [5.0], samples=20000, seed=0)
    assert c.values[0] == pytest.approx(10.0)


def test_mc_seed_reproducible():
    star = phi_star(SchrodingerSpec.from_field_2d("x1^2-x2"))
    a = sublevel_curve(star, [1e3, 1e4], 5000, seed=3)
    b = sublevel_curve(star, [1e3, 1e4], 5000, seed=3)
    assert np.array_equal(a.values, b.values)


def test_inhomogeneous_growth_constant():
    star = phi_star(SchrodingerSpec.from_field_2d("x1^2-x2"))
    g = sublevel_curve(star, [1e3], 20000, seed=0).values[0]
    assert g / (1e3 ** 4 / 3) == pytest.approx(1.0, rel=0.1)


def test_dilation_weights():
    assert dilation_weights(SchrodingerSpec.from_field_2d("x1^2-x2")).gamma == (Fraction(1, 2), Fraction(1))


@pytest.mark.parametrize("b, V, case, alpha, beta", [
    ("x1^2-x2", "0", "B", 4, 0),
    ("x1*x2", "0", "C", 3, 1),
    ("x1^2*x2", "0", "C", 3, 0),
    ("x1^2*x2^2", "0", "C", Fraction(5, 2), 1),
    ("x1^2+x2^2+1", "0", "A", 3, 0),
])
def test_exact_limit_cases(b, V, case, alpha, beta):
    st = pipeline.run(SchrodingerSpec.from_field_2d(b, V), validate=False, upto="limit")
    assert (st.limit.case, st.limit.alpha, st.limit.beta) == (case, alpha, beta)


def test_exact_limit_weyl():
    st = pipeline.run(SchrodingerSpec.from_strings(2, V="x1^2+x2^2"), validate=False, upto="limit")
    assert (st.limit.case, st.limit.alpha) == ("A", 3)


@pytest.mark.slow
def test_exact_limit_validation_runs():
    st = pipeline.run(SchrodingerSpec.from_field_2d("x1*x2"), validate=True, upto="limit")
    assert abs(st.limit.validation["a"] - 3) < 0.1 and st.limit.validation["b"] == 1


def test_intermediate_density():
    mu = pipeline.run(SchrodingerSpec.from_field_2d("x1*x2"), validate=False, upto="limit").limit
    assert np.allclose(mu.density(np.array([[0.5, 2.0]])), 2.0)


def test_classify_inhomogeneous_strong():
    rep = classify(SchrodingerSpec.from_field_2d("x1^2-x2"), LAMS, samples=20000)
    assert rep.classification == "Strong"
    assert abs(rep.fits[0].a - 4) < 0.1 and abs(rep.fits[1].a - 5) < 0.1


def test_classify_weyl_kappa_one():
    rep = classify(SchrodingerSpec.from_strings(2, V="x1^2+x2^2"), LAMS, samples=20000)
    assert rep.classification == "WeakIntermediate"
    assert rep.kappa == pytest.approx(1.0, abs=0.02)


def test_classify_intermediate():
    rep = classify(SchrodingerSpec.from_field_2d("x1*x2"), LAMS, samples=20000)
    assert rep.classification == "WeakIntermediate"
    assert 1.7 <= rep.kappa <= 2.3
