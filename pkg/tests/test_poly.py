from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orbitcount.errors import NegativeExponent, NotQuasiHomogeneous, PolySyntaxError, VariableOutOfRange
from orbitcount.poly import MultiPoly, dilation_identity_holds, parse, quasi_weights

N = 3
coeffs = st.fractions(min_value=-5, max_value=5, max_denominator=4)
exps = st.tuples(*[st.integers(0, 3)] * N)
polys = st.dictionaries(exps, coeffs, max_size=4).map(lambda t: MultiPoly(N, t))


@given(polys, polys, polys)
def test_ring_axioms(p, q, r):
    assert p + q == q + p
    assert p * q == q * p
    assert (p + q) + r == p + (q + r)
    assert (p * q) * r == p * (q * r)
    assert p * (q + r) == p * q + p * r
    assert p - p == MultiPoly.zero(N)
    assert p * 1 == p


@given(polys)
def test_text_roundtrip(p):
    assert parse(str(p), N) == p


@given(polys, polys)
def test_leibniz(p, q):
    for j in range(1, N + 1):
        assert (p * q).partial(j) == p.partial(j) * q + p * q.partial(j)


@given(polys, st.lists(st.floats(-2, 2), min_size=N, max_size=N))
def test_feval_matches_exact(p, x):
    exact = sum(float(c) * np.prod([xi ** e for xi, e in zip(x, a)]) for a, c in p.items())
    assert p.feval(np.array([x]))[0] == pytest.approx(exact, rel=1e-9, abs=1e-9)


def test_parse_basic():
    p = parse("x1^2 - 2*x1*x2 + 1/3", 2)
    assert p.coefficient((2, 0)) == 1
    assert p.coefficient((1, 1)) == -2
    assert p.constant_term() == Fraction(1, 3)
    assert parse("(x1+x2)^2", 2) == parse("x1^2 + 2*x1*x2 + x2^2", 2)
    assert parse("-x1", 1) == -MultiPoly.var(1, 1)


@pytest.mark.parametrize("text, err", [
    ("x1^", PolySyntaxError),
    ("x1 +* x2", PolySyntaxError),
    ("(x1", PolySyntaxError),
    ("x3", VariableOutOfRange),
    ("x1^-1", (NegativeExponent, PolySyntaxError)),
])
def test_parse_errors(text, err):
    with pytest.raises(err):
        parse(text, 2)


def test_partial_example():
    assert parse("x1^2*x2^2", 2).partial(1) == parse("2*x1*x2^2", 2)


def test_substitute_and_degree():
    p = parse("x1^3*x2 + x2", 2)
    assert p.degree() == 4
    assert p.degree_in(1) == 3
    swapped = p.substitute([MultiPoly.var(2, 2), MultiPoly.var(1, 2)])
    assert swapped == parse("x2^3*x1 + x1", 2)


def test_quasi_weights_point():
    w = quasi_weights([parse("x1^2 + x2^4", 2)])
    assert w.gamma == (Fraction(1, 2), Fraction(1, 4))
    assert w.kind == "point"
    assert dilation_identity_holds(parse("x1^2 + x2^4", 2), w)


def test_quasi_weights_polytope():
    # one monomial, two weights: a segment of solutions
    w = quasi_weights([parse("x1*x2", 2)])
    assert w.kind == "polytope"
    assert sum(w.gamma) == 1 and all(g > 0 for g in w.gamma)


def test_not_quasi_homogeneous():
    with pytest.raises(NotQuasiHomogeneous):
        quasi_weights([parse("x1^2 + x1^3", 1)])


@settings(max_examples=30)
@given(st.integers(1, 4), st.integers(1, 4))
def test_dilation_identity_on_monomial_sums(i, j):
    p = parse(f"x1^{i} + x2^{j}", 2)
    assert dilation_identity_holds(p, quasi_weights([p]))
