"""The nilpotent Lie algebra spanned by L_j = d/dx_j + i a_j(x) and the
multiplication operators i*P(x), plus discreteness, skew forms and
polarizations.

Elements are coordinate vectors (tuples of Fractions) in an ordered
basis.  For algebras built from a Schrodinger operator the basis is
(L_1, ..., L_n, i*m_1, ..., i*m_K); quotients and hand-made algebras use
whatever basis they are given.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import qlinalg
from .errors import DimensionMismatch, InternalInconsistency
from .poly import MultiPoly, grlex_key, parse


# --- operator specification --------------------------------------------------

@dataclass(frozen=True)
class SchrodingerSpec:
    """H = -sum_j (d_j + i a_j)^2 + V on L^2(R^n)."""
    n: int
    a: tuple
    V: MultiPoly

    def __post_init__(self):
        if len(self.a) != self.n:
            raise DimensionMismatch(f"need {self.n} magnetic components, got {len(self.a)}")
        for p in list(self.a) + [self.V]:
            if p.nvars != self.n:
                raise DimensionMismatch("polynomial ring does not match n")

    @classmethod
    def from_strings(cls, n, a=None, V="0"):
        a = a or ["0"] * n
        return cls(n, tuple(parse(s, n) for s in a), parse(V, n))

    @classmethod
    def from_field_2d(cls, b, V="0"):
        """2D operator whose field d1 a2 - d2 a1 equals ``b``.

        Uses a = (0, int_0^{x1} b dx1).  Note the tensor entry B[0][1]
        (= d2 a1 - d1 a2) is then -b; only |b| matters for the spectrum.
        """
        b = parse(b, 2) if isinstance(b, str) else b
        V = parse(V, 2) if isinstance(V, str) else V
        a2 = MultiPoly(2, {(e1 + 1, e2): c / (e1 + 1) for (e1, e2), c in b.items()})
        return cls(2, (MultiPoly.zero(2), a2), V)

    @property
    def B(self):
        n = self.n
        return tuple(tuple(self.a[j].partial(k + 1) - self.a[k].partial(j + 1) for k in range(n))
                     for j in range(n))

    def field_components(self):
        """b_jk for j < k, as ((j, k), poly) with 1-based indices, zeros dropped."""
        B = self.B
        return [((j + 1, k + 1), B[j][k]) for j in range(self.n) for k in range(j + 1, self.n)
                if not B[j][k].is_zero()]

    def generators(self):
        """V and the nonzero b_jk (j < k)."""
        gens = [] if self.V.is_zero() else [self.V]
        return gens + [p for _, p in self.field_components()]

    def describe(self):
        return {"n": self.n, "a": [str(p) for p in self.a], "V": str(self.V)}


def is_gauge_invariant_pair(spec1: SchrodingerSpec, spec2: SchrodingerSpec) -> bool:
    if spec1.n != spec2.n:
        raise DimensionMismatch("specs live in different dimensions")
    return spec1.V == spec2.V and spec1.B == spec2.B


def discreteness(spec: SchrodingerSpec) -> bool:
    """True iff no direction y != 0 leaves V and every b_jk invariant."""
    gens = spec.generators()
    if not gens:
        return False
    n = spec.n
    rows = []
    for P in gens:
        grads = [P.partial(j + 1) for j in range(n)]
        monos = {m for g in grads for m in g.monomials()}
        for m in monos:
            rows.append([g.coefficient(m) for g in grads])
    return len(qlinalg.nullspace(rows, n)) == 0


# --- Lie algebra ---------------------------------------------------------------

def _vec(dim, entries=None):
    v = [Fraction(0)] * dim
    for i, c in (entries or {}).items():
        v[i] = Fraction(c)
    return tuple(v)


class LieAlgebra:
    """Finite-dimensional real Lie algebra given by rational structure constants.

    ``table[(i, j)]`` is a dict k -> c with [E_i, E_j] = sum c E_k, stored
    for every ordered pair with a nonzero bracket.  ``generators`` are the
    images of L_1..L_N, ``L0`` the image of i*V (or None).
    """

    def __init__(self, labels, table, generators, L0=None, mult_basis=(), poly_of=None):
        self.labels = tuple(labels)
        self.dim = len(self.labels)
        self.table = {k: dict(v) for k, v in table.items() if any(c != 0 for c in v.values())}
        self.generators = tuple(tuple(Fraction(c) for c in g) for g in generators)
        self.L0 = None if L0 is None or all(c == 0 for c in L0) else tuple(Fraction(c) for c in L0)
        self.mult_basis = tuple(mult_basis)
        # basis index -> polynomial P with E = i*P (only for built algebras)
        self.poly_of = dict(poly_of or {})

    @property
    def n(self):
        return len(self.generators)

    def e(self, i):
        return _vec(self.dim, {i: 1})

    def zero(self):
        return _vec(self.dim)

    def bracket(self, u, v):
        out = [Fraction(0)] * self.dim
        nz_u = [(i, c) for i, c in enumerate(u) if c]
        nz_v = [(j, c) for j, c in enumerate(v) if c]
        for i, a in nz_u:
            for j, b in nz_v:
                entry = self.table.get((i, j))
                if entry:
                    ab = a * b
                    for k, c in entry.items():
                        out[k] += ab * c
        return tuple(out)

    def ad_matrix(self, u):
        """Matrix of ad u, columns indexed by basis elements."""
        cols = [self.bracket(u, self.e(j)) for j in range(self.dim)]
        return [[cols[j][i] for j in range(self.dim)] for i in range(self.dim)]

    def span_basis(self, vectors):
        vectors = [tuple(v) for v in vectors if any(c != 0 for c in v)]
        if not vectors:
            return []
        R, _ = qlinalg.rref(vectors, self.dim)
        return [tuple(r) for r in R]

    def derived(self, U=None, W=None):
        """Basis of [U, W] (defaults to the whole algebra)."""
        U = U if U is not None else [self.e(i) for i in range(self.dim)]
        W = W if W is not None else [self.e(i) for i in range(self.dim)]
        return self.span_basis([self.bracket(u, w) for u in U for w in W])

    def lower_central_series(self, max_steps=64):
        series = [[self.e(i) for i in range(self.dim)]]
        whole = series[0]
        for _ in range(max_steps):
            nxt = self.derived(whole, series[-1])
            series.append(nxt)
            if not nxt:
                return series
        raise InternalInconsistency("lower central series did not terminate")

    def is_abelian(self, vectors=None):
        vectors = vectors if vectors is not None else [self.e(i) for i in range(self.dim)]
        return all(all(c == 0 for c in self.bracket(u, w)) for u in vectors for w in vectors)

    def is_ideal(self, vectors):
        span = self.span_basis(vectors)
        for i in range(self.dim):
            for v in span:
                if not qlinalg.in_span(span, list(self.bracket(self.e(i), v))):
                    return False
        return True

    def jacobi_defects(self):
        """Basis triples (i, j, k) where the Jacobi identity fails."""
        bad = []
        E = [self.e(i) for i in range(self.dim)]
        for i in range(self.dim):
            for j in range(i + 1, self.dim):
                bij = self.bracket(E[i], E[j])
                for k in range(j + 1, self.dim):
                    s = [a + b + c for a, b, c in zip(self.bracket(bij, E[k]),
                                                       self.bracket(self.bracket(E[j], E[k]), E[i]),
                                                       self.bracket(self.bracket(E[k], E[i]), E[j]))]
                    if any(s):
                        bad.append((i, j, k))
        return bad

    def antisymmetry_defects(self):
        bad = []
        for (i, j), entry in self.table.items():
            other = self.table.get((j, i), {})
            keys = set(entry) | set(other)
            if any(entry.get(k, 0) != -other.get(k, 0) for k in keys):
                bad.append((i, j))
        for i in range(self.dim):
            if (i, i) in self.table:
                bad.append((i, i))
        return bad

    def structure_triples(self):
        return sorted((i, j, k, c) for (i, j), entry in self.table.items() for k, c in entry.items())

    def to_json(self):
        return json.dumps({
            "labels": list(self.labels),
            "structure": [[i, j, k, str(c)] for i, j, k, c in self.structure_triples()],
            "generators": [[str(c) for c in g] for g in self.generators],
            "L0": None if self.L0 is None else [str(c) for c in self.L0],
        }, indent=1, sort_keys=True)

    # quotients
    def quotient(self, ideal):
        """Quotient by an ideal; returns (gbar, proj) with proj a vector map."""
        ideal = self.span_basis(ideal)
        if not self.is_ideal(ideal):
            raise InternalInconsistency("quotient by a subspace that is not an ideal")
        keep = []
        current = list(ideal)
        for i in range(self.dim):
            if not qlinalg.in_span(current, list(self.e(i))):
                keep.append(i)
                current.append(self.e(i))
        cols = [self.e(i) for i in keep] + list(ideal)
        M = qlinalg.transpose([list(c) for c in cols])

        def proj(v):
            y = qlinalg.solve(M, list(v))
            return tuple(y[:len(keep)])

        table = {}
        for a, i in enumerate(keep):
            for b, j in enumerate(keep):
                if a == b:
                    continue
                br = proj(self.bracket(self.e(i), self.e(j)))
                entry = {k: c for k, c in enumerate(br) if c}
                if entry:
                    table[(a, b)] = entry
        gens = [proj(g) for g in self.generators]
        L0 = None if self.L0 is None else proj(self.L0)
        poly_of = {a: self.poly_of[i] for a, i in enumerate(keep) if i in self.poly_of}
        gbar = LieAlgebra([self.labels[i] for i in keep], table, gens, L0, (), poly_of)
        gbar.parent_indices = tuple(keep)
        return gbar, proj


def _mult_basis(spec):
    """Canonical Q-basis (reduced echelon in grlex order) of the derivative closure."""
    polys = []
    for g in spec.generators():
        polys.extend(g.all_derivatives().values())
    if not polys:
        return []
    monos = sorted({m for p in polys for m in p.monomials()}, key=grlex_key, reverse=True)
    rows = [[p.coefficient(m) for m in monos] for p in polys]
    R, piv = qlinalg.rref(rows, len(monos))
    basis = []
    for r in R:
        basis.append(MultiPoly(spec.n, {m: c for m, c in zip(monos, r) if c}))
    return basis


def mult_coordinates(basis, P):
    """Coordinates of P in a reduced-echelon polynomial basis (exact)."""
    coords = []
    rest = P
    for m in basis:
        lm = m.leading_monomial()
        c = P.coefficient(lm)
        coords.append(c)
        if c:
            rest = rest - m * c
    if not rest.is_zero():
        raise InternalInconsistency(f"{P} is not in the span of the multiplication basis")
    return coords


def build(spec: SchrodingerSpec) -> LieAlgebra:
    n = spec.n
    mb = _mult_basis(spec)
    K = len(mb)
    dim = n + K
    labels = [f"L{j + 1}" for j in range(n)] + [f"i({m})" for m in mb]

    # element = (first-order coefficients c, polynomial P) meaning sum c_j L_j + i P
    def elem(idx):
        if idx < n:
            return [Fraction(int(j == idx)) for j in range(n)], MultiPoly.zero(n)
        return [Fraction(0)] * n, mb[idx - n]

    curl = [[spec.a[k].partial(j + 1) - spec.a[j].partial(k + 1) for k in range(n)] for j in range(n)]

    def bracket_poly(x, y):
        (c, P), (d, Q) = x, y
        out = MultiPoly.zero(n)
        for j in range(n):
            for k in range(n):
                if c[j] and d[k]:
                    out = out + curl[j][k] * (c[j] * d[k])
            if c[j]:
                out = out + Q.partial(j + 1) * c[j]
            if d[j]:
                out = out - P.partial(j + 1) * d[j]
        return out

    table = {}
    for i in range(dim):
        for j in range(dim):
            if i == j or (i >= n and j >= n):
                continue
            P = bracket_poly(elem(i), elem(j))
            if P.is_zero():
                continue
            coords = mult_coordinates(mb, P)
            table[(i, j)] = {n + r: c for r, c in enumerate(coords) if c}
    gens = [_vec(dim, {j: 1}) for j in range(n)]
    L0 = None
    if not spec.V.is_zero():
        L0 = _vec(dim, {n + r: c for r, c in enumerate(mult_coordinates(mb, spec.V))})
    g = LieAlgebra(labels, table, gens, L0, mb, {n + r: m for r, m in enumerate(mb)})
    g.spec = spec
    return g


# --- functionals, skew forms, polarizations -----------------------------------------

@dataclass(frozen=True)
class LinFunctional:
    values: tuple
    exact: bool = True

    def __call__(self, v):
        return sum((a * b for a, b in zip(self.values, v)), Fraction(0) if self.exact else 0.0)

    @classmethod
    def make(cls, values):
        exact = all(isinstance(v, (int, Fraction)) for v in values)
        if exact:
            return cls(tuple(Fraction(v) for v in values), True)
        return cls(tuple(float(v) for v in values), False)


def functional_at(g: LieAlgebra, xi=None, x=None) -> LinFunctional:
    """f(L_j) = xi_j, f(i*P) = P(x) for an algebra built from a spec."""
    n = g.n
    xi = xi if xi is not None else [0] * n
    x = x if x is not None else [0] * n
    vals = [Fraction(0)] * g.dim
    for j in range(n):
        vals[j] = Fraction(xi[j])
    for i, P in g.poly_of.items():
        vals[i] = P(*x)
    return LinFunctional.make(vals)


def base_point(g: LieAlgebra) -> LinFunctional:
    """Evaluation at the origin: f0(L_j) = 0, f0(i*P) = P(0)."""
    return functional_at(g)


@dataclass(frozen=True)
class SkewForm:
    matrix: tuple
    rank: int
    radical: tuple


def skew_form(g: LieAlgebra, f: LinFunctional) -> SkewForm:
    M = [[f(g.bracket(g.e(i), g.e(j))) for j in range(g.dim)] for i in range(g.dim)]
    if not f.exact:
        # a float functional: round through Fractions so the nullspace stays exact
        M = [[Fraction(v) for v in row] for row in M]
    rad = qlinalg.nullspace(M, g.dim)
    return SkewForm(tuple(tuple(r) for r in M), g.dim - len(rad), tuple(tuple(v) for v in rad))


@dataclass(frozen=True)
class Polarization:
    basis: tuple              # vectors spanning h (reduced echelon)
    complement: tuple         # generator indices (0-based) used as coexponential directions
    dim: int
    reindexing: dict = field(default_factory=dict)


def polarization(g: LieAlgebra, f: LinFunctional) -> Polarization:
    """Maximal isotropic ideal containing g(f) + R L0 + [g, g].

    The seed is extended by basis vectors in basis order (L_1 first);
    if that stalls, a vector of the B_f-orthogonal complement is used.
    """
    form = skew_form(g, f)
    M = form.matrix
    target2 = g.dim + (g.dim - form.rank)
    if target2 % 2:
        raise InternalInconsistency("odd rank skew form")
    target = target2 // 2

    def B(u, v):
        return sum((u[i] * M[i][j] * v[j] for i in range(g.dim) if u[i] for j in range(g.dim) if v[j]),
                   Fraction(0))

    seed = list(form.radical) + g.derived()
    if g.L0 is not None:
        seed.append(g.L0)
    W = g.span_basis(seed)
    if any(B(u, v) != 0 for u in W for v in W):
        raise InternalInconsistency("seed of the polarization is not isotropic")
    for i in range(g.dim):
        if len(W) >= target:
            break
        c = g.e(i)
        if qlinalg.in_span(W, list(c)):
            continue
        if all(B(c, w) == 0 for w in W):
            W = g.span_basis(W + [c])
    while len(W) < target:
        # orthogonal complement of W, pick a vector outside W
        perp = qlinalg.nullspace([[sum(w[i] * M[i][j] for i in range(g.dim)) for j in range(g.dim)]
                                  for w in W], g.dim)
        extra = next((v for v in perp if not qlinalg.in_span(W, v)), None)
        if extra is None:
            raise InternalInconsistency("isotropic extension stalled below the required dimension")
        W = g.span_basis(W + [tuple(extra)])
    if len(W) != target:
        raise InternalInconsistency(f"polarization has dim {len(W)}, expected {target}")
    if not g.is_ideal(W):
        raise InternalInconsistency("polarization is not an ideal")
    complement = []
    span = list(W)
    for j, gen in enumerate(g.generators):
        if not qlinalg.in_span(span, list(gen)):
            complement.append(j)
            span.append(gen)
    if len(span) != g.dim:
        raise InternalInconsistency("generators do not complete the polarization")
    reindex = {j: k for k, j in enumerate(complement)}
    return Polarization(tuple(W), tuple(complement), len(W), reindex)
