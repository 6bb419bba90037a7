import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orbitcount.errors import UnboundedSublevelSet
from orbitcount.poly import parse
from orbitcount.volume import SublevelProblem, SublevelVolume, axis_bound, fiber_intervals


def problem(terms, n):
    return SublevelProblem.from_terms([(parse(t, n), p) for t, p in terms], n)


def within(est, err, exact, k=4.0, rel=1e-9):
    return abs(est - exact) <= k * err + rel * abs(exact)


def test_diamond():
    est, err = SublevelVolume(problem([("x1", 1.0), ("x2", 1.0)], 2)).estimate(3.0, 20000, 0)
    assert within(est, err, 2 * 9.0)


def test_ball_variables_are_exact():
    # |xi|^2 + x^2 <= T: disk of area pi T, both variables analytic
    est, err = SublevelVolume(problem([("x1", 2.0), ("x2", 2.0)], 2)).estimate(4.0)
    assert err == 0.0 and est == pytest.approx(4 * math.pi)


def test_offset_only():
    est, _ = SublevelVolume(problem([("x1", 2.0), ("3", 1.0)], 1)).estimate(2.0)
    assert est == 0.0


@pytest.mark.parametrize("T", [10.0, 1e4])
def test_sheared_slab(T):
    # |x2 + x1^2| + |x1| <= T has area 2 T^2 whatever the shear
    vol = SublevelVolume(problem([("x2 + x1^2", 1.0), ("x1", 1.0)], 2))
    est, err = vol.estimate(T, 20000, 1)
    assert est / (2 * T * T) == pytest.approx(1.0, rel=0.01)


def test_parabola_region():
    # |x1^2 - x2|^(1/2) + |x1| <= 2: each x1 slice has length 2 (2 - |x1|)^2, total 32/3
    vol = SublevelVolume(problem([("x1^2 - x2", 0.5), ("x1", 1.0)], 2))
    est, err = vol.estimate(2.0, 40000, 2)
    assert est == pytest.approx(32 / 3, rel=0.005)


def test_axis_bound():
    n = 2
    assert axis_bound([(parse("x1^2", n), 1.0)], 0, 4.0, n) == pytest.approx(2.0)
    assert axis_bound([(parse("x1^2 + 5", n), 1.0)], 0, 4.0, n) == 0.0


def test_fiber_intervals_circle():
    prob = problem([("x1^2 + x2^2", 1.0)], 2)
    lo, hi, row = fiber_intervals(prob, 1, np.array([[0.6, 0.0], [2.0, 0.0]]), 1.0)
    assert list(row) == [0]
    assert lo[0] == pytest.approx(-0.8) and hi[0] == pytest.approx(0.8)


def test_fiber_intervals_unbounded():
    prob = problem([("x1", 1.0)], 2)
    with pytest.raises(UnboundedSublevelSet):
        fiber_intervals(prob, 1, np.array([[0.1, 0.0]]), 1.0)
    lo, hi, _ = fiber_intervals(prob, 1, np.array([[0.1, 0.0]]), 1.0, allow_unbounded=True)
    assert np.isinf(lo[0]) and np.isinf(hi[0])


@settings(max_examples=15, deadline=None)
@given(st.floats(0.5, 20.0), st.integers(1, 3))
def test_power_scaling(T, q):
    # |x1|^q + |x2| <= T: area 4 q/(q+1) T^(1 + 1/q)
    vol = SublevelVolume(problem([(f"x1^{q}", 1.0), ("x2", 1.0)], 2))
    est, err = vol.estimate(T, 4000, 0)
    exact = 4 * q / (q + 1) * T ** (1 + 1 / q)
    assert est == pytest.approx(exact, rel=0.02)
