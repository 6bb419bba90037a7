"""Random operator specs for the property tests (degree <= 4, n <= 3)."""
import random
from fractions import Fraction

from orbitcount.liealg import SchrodingerSpec
from orbitcount.poly import MultiPoly


def random_poly(rng, n, max_deg=4, max_terms=3, min_deg=0):
    terms = {}
    for _ in range(rng.randint(1, max_terms)):
        d = rng.randint(min_deg, max_deg)
        alpha = [0] * n
        for _ in range(d):
            alpha[rng.randrange(n)] += 1
        terms[tuple(alpha)] = Fraction(rng.choice([-3, -2, -1, 1, 2, 3]), rng.choice([1, 1, 2, 3]))
    return MultiPoly(n, terms)


def random_spec(rng, n=None):
    n = n or rng.randint(1, 3)
    a = []
    for _ in range(n):
        a.append(random_poly(rng, n, 4, 2, 1) if rng.random() < 0.6 else MultiPoly.zero(n))
    V = random_poly(rng, n, 4, 2) if rng.random() < 0.6 else MultiPoly.zero(n)
    return SchrodingerSpec(n, tuple(a), V)


def random_specs(count, seed=0, n=None):
    rng = random.Random(seed)
    return [random_spec(rng, n) for _ in range(count)]
