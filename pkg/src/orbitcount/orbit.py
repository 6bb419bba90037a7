"""Coadjoint orbit charts, reduced operators and quotient families of orbits."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import qlinalg
from .errors import InternalInconsistency, NonAbelianPolarization, UnsupportedStructure
from .liealg import LieAlgebra, LinFunctional, Polarization, polarization
from .poly import MultiPoly


@dataclass(frozen=True)
class OrbitChart:
    g: LieAlgebra
    coords: tuple          # one MultiPoly per basis element, in (xi_1..xi_n', x_1..x_n')
    base_point: LinFunctional
    coexp: tuple           # generator indices used as coexponential directions
    h: Polarization

    @property
    def n_prime(self):
        return len(self.coexp)

    @property
    def dim_params(self):
        return 2 * self.n_prime

    @property
    def normalization(self):
        return (2 * math.pi) ** (-self.n_prime)

    def at(self, xi, x):
        pt = list(xi) + list(x)
        return LinFunctional.make([c(*pt) for c in self.coords])

    def feval(self, Z):
        Z = np.asarray(Z, dtype=float)
        return np.stack([c.feval(Z) for c in self.coords], axis=-1)


@dataclass(frozen=True)
class ReducedOperator:
    """-sum_j (d_j + i a_j)^2 + W on L^2(R^n_red)."""
    n_red: int
    a_red: tuple
    W_red: MultiPoly
    provenance: dict = field(default_factory=dict)

    def is_scalar(self):
        return self.n_red == 0

    def scalar(self):
        return self.W_red.constant_term()


def _taylor_images(g, hbasis, coexp_vecs, f, nvars, offset):
    """p_A(x) = sum_alpha f((ad L)^alpha A) x^alpha / alpha! for each A in hbasis."""
    m = len(coexp_vecs)
    out = []
    for A in hbasis:
        terms = {}
        stack = [((0,) * m, tuple(A), 0)]
        while stack:
            alpha, v, last = stack.pop()
            val = f(v)
            if val:
                denom = 1
                for a in alpha:
                    denom *= math.factorial(a)
                mono = [0] * nvars
                for j, a in enumerate(alpha):
                    mono[offset + j] = a
                terms[tuple(mono)] = terms.get(tuple(mono), 0) + val / denom
            for j in range(last, m):
                w = g.bracket(coexp_vecs[j], v)
                if any(w):
                    nxt = list(alpha)
                    nxt[j] += 1
                    stack.append((tuple(nxt), w, j))
        out.append(MultiPoly(nvars, terms))
    return out


def _decompose(g, coexp_vecs, hbasis):
    """Rows of coordinates of each basis vector of g in (coexp_vecs, hbasis)."""
    cols = [list(v) for v in coexp_vecs] + [list(v) for v in hbasis]
    if len(cols) != g.dim:
        raise InternalInconsistency("coexponential directions plus polarization do not span g")
    M = qlinalg.transpose(cols)
    rows = []
    for i in range(g.dim):
        y = qlinalg.solve(M, list(g.e(i)))
        if y is None:
            raise InternalInconsistency("basis vector outside span")
        rows.append(y)
    return rows


def _abelianize(g, h, f):
    """Pass to g/[h,h] when the polarization is not abelian."""
    hh = g.derived(list(h.basis), list(h.basis))
    if not hh:
        return g, h, f, None
    if any(f(v) != 0 for v in hh):
        raise NonAbelianPolarization("functional does not vanish on [h, h]")
    gq, proj = g.quotient(hh)
    keep = gq.parent_indices
    fq = LinFunctional.make([f.values[i] for i in keep]) if f.exact else LinFunctional(tuple(f.values[i] for i in keep), False)
    hb = gq.span_basis([proj(v) for v in h.basis])
    hq = Polarization(tuple(hb), h.complement, len(hb), h.reindexing)
    if gq.derived(hb, hb):
        raise NonAbelianPolarization("polarization still non-abelian after quotient by [h, h]")
    return gq, hq, fq, proj


def chart(g: LieAlgebra, h: Polarization, f0: LinFunctional) -> OrbitChart:
    g_work, h_work, f_work, proj = _abelianize(g, h, f0)
    coexp = h.complement
    m = len(coexp)
    nv = 2 * m
    cvecs = [g_work.generators[j] for j in coexp]
    images = _taylor_images(g_work, h_work.basis, cvecs, f_work, nv, m)
    rows = _decompose(g_work, cvecs, h_work.basis)
    coords_w = []
    for y in rows:
        p = MultiPoly.zero(nv)
        for j in range(m):
            if y[j]:
                p = p + MultiPoly.var(j + 1, nv) * y[j]
        for k, img in enumerate(images):
            if y[m + k]:
                p = p + img * y[m + k]
        coords_w.append(p)
    if proj is None:
        coords = coords_w
    else:
        coords = []
        for i in range(g.dim):
            v = proj(g.e(i))
            p = MultiPoly.zero(nv)
            for a, c in enumerate(v):
                if c:
                    p = p + coords_w[a] * c
            coords.append(p)
    return OrbitChart(g, tuple(coords), f0, tuple(coexp), h)


def poincare_gauge(F, n):
    """a_k(x) = sum_j x_j int_0^1 t F_jk(t x) dt, so d_j a_k - d_k a_j = F_jk."""
    a = []
    for k in range(n):
        ak = MultiPoly.zero(n)
        for j in range(n):
            Fjk = F[j][k]
            if Fjk.is_zero():
                continue
            scaled = MultiPoly(n, {al: c / (sum(al) + 2) for al, c in Fjk.items()})
            ak = ak + MultiPoly.var(j + 1, n) * scaled
        a.append(ak)
    return tuple(a)


def realize_reduced(g: LieAlgebra, h: Polarization, f: LinFunctional) -> ReducedOperator:
    """Image of -sum L_j^2 - i L_0 in the representation induced from h at f."""
    g_work, h_work, f_work, proj = _abelianize(g, h, f)
    coexp = h.complement
    m = len(coexp)
    cvecs = [g_work.generators[j] for j in coexp]
    images = _taylor_images(g_work, h_work.basis, cvecs, f_work, m, 0)
    M = qlinalg.transpose([list(v) for v in h_work.basis])

    def p_of(v):
        y = qlinalg.solve(M, list(v)) if h_work.basis else None
        if y is None:
            if any(v):
                raise InternalInconsistency("element expected in the polarization")
            return MultiPoly.zero(m)
        p = MultiPoly.zero(m)
        for k, c in enumerate(y):
            if c:
                p = p + images[k] * c
        return p

    W = MultiPoly.zero(m)
    for j, gen in enumerate(g_work.generators):
        if j in coexp:
            continue
        W = W + p_of(gen) ** 2
    if g_work.L0 is not None:
        W = W + p_of(g_work.L0)
    F = [[p_of(g_work.bracket(cvecs[a], cvecs[b])) if a != b else MultiPoly.zero(m)
          for b in range(m)] for a in range(m)]
    a_red = poincare_gauge(F, m)
    return ReducedOperator(m, a_red, W, {"functional": [str(v) for v in f.values],
                                          "coexp": list(coexp)})


def realize_at(g: LieAlgebra, f: LinFunctional) -> ReducedOperator:
    return realize_reduced(g, polarization(g, f), f)


# --- quotient families -----------------------------------------------------------

FAMILY_KINDS = ("Abelian", "HeisenbergCdV", "MonomialChain", "TriangularChain")


@dataclass
class QuotientFamily:
    """Decomposition of the limit measure into orbits.

    ``params`` names the coordinates of Q, ``nu`` evaluates the density of
    nu against Lebesgue on Q (vectorized), ``section`` maps a Q-point to a
    functional on gbar, and ``data`` holds the kind-specific numbers used
    by the fast numeric templates in asym.
    """
    kind: str
    gbar: LieAlgebra
    params: tuple
    region: str
    nu_text: str
    nu: Callable
    section: Callable
    data: dict = field(default_factory=dict)

    def reduced_at(self, q):
        f = self.section(q)
        return realize_at(self.gbar, f)

    def to_json(self):
        tmpl = self.data.get("template", "")
        return json.dumps({"kind": self.kind, "params": list(self.params), "region": self.region,
                           "nu": self.nu_text, "reduced_operator": tmpl}, indent=1, sort_keys=True)


def _center(g):
    rows = []
    for i in range(g.dim):
        ad = g.ad_matrix(g.e(i))
        rows.extend(ad)
    return qlinalg.nullspace(rows, g.dim) if rows else [list(g.e(i)) for i in range(g.dim)]


def _functional(g, values):
    return LinFunctional.make(values)


def orbit_space(gbar: LieAlgebra, mu0) -> QuotientFamily:
    """Dispatch over the closed family catalog."""
    if gbar.is_abelian():
        return _abelian_family(gbar, mu0)
    case = getattr(mu0, "case", None)
    if case == "C":
        return _monomial_family(gbar, mu0)
    if case == "B":
        return _triangular_family(gbar, mu0)
    derived = gbar.derived()
    center = _center(gbar)
    if derived and all(qlinalg.in_span(center, list(v)) for v in derived):
        return _heisenberg_family(gbar, mu0)
    raise UnsupportedStructure(
        f"algebra of dim {gbar.dim} with derived dim {len(derived)} and center dim {len(center)} "
        "is not in the family catalog")


def _abelian_family(gbar, mu0):
    n = gbar.n
    proj = mu0.projection

    def nu(q):
        return np.full(np.shape(q)[:-1], (2 * math.pi) ** (-n))

    def section(q):
        return _functional(gbar, [c(*q) if all(isinstance(v, (int, Fraction)) for v in q) else c.feval(np.asarray(q, float))
                                  for c in proj])

    V = mu0.potential
    return QuotientFamily("Abelian", gbar, tuple([f"xi{j + 1}" for j in range(n)] + [f"x{j + 1}" for j in range(n)]),
                          f"R^{2 * n}", f"(2pi)^-{n} dxi dx", nu, section,
                          {"n": n, "V": V, "template": "scalar |xi|^2 + V(x)"})


def _heisenberg_family(gbar, mu0):
    """Central derived algebra: Landau levels of i B(x) with the full tensor."""
    spec = mu0.spec
    n = spec.n
    Bpolys = mu0.field
    V = mu0.potential
    nu_text = "(2pi)^(r-n) b_1(x)...b_r(x) dxi'' dx"

    def bvals(x):
        return field_eigenvalues(Bpolys, np.atleast_2d(np.asarray(x, float)))

    def nu(q):
        q = np.atleast_2d(np.asarray(q, float))
        b, r = bvals(q[:, -n:])
        return (2 * math.pi) ** (r - n) * np.prod(b, axis=1)

    def section(q):
        x = list(q)[-n:]
        vals = []
        for c in mu0.projection:
            vals.append(c(*([0] * n + x)))
        return _functional(gbar, vals)

    return QuotientFamily("HeisenbergCdV", gbar, tuple([f"x{j + 1}" for j in range(n)]),
                          "{x : rank B(x) maximal}", nu_text, nu, section,
                          {"n": n, "field": Bpolys, "V": V, "bvals": bvals,
                           "template": "sum_j (2 m_j + 1) b_j(x) + |xi''|^2 + V(x)"})


def field_eigenvalues(Bpolys, X, rel_tol=1e-10):
    """Positive eigenvalues b_1..b_r of i B(x) at each row of X, with the generic rank r.

    Returns (array (N, r), r).  For n = 2 this is |b_12(x)|.
    """
    X = np.atleast_2d(X)
    n = len(Bpolys)
    N = X.shape[0]
    B = np.zeros((N, n, n))
    for j in range(n):
        for k in range(n):
            if not Bpolys[j][k].is_zero():
                B[:, j, k] = Bpolys[j][k].feval(X)
    if n == 2:
        return np.abs(B[:, 0, 1])[:, None], 1
    ev = np.linalg.eigvalsh(1j * B)
    scale = np.maximum(np.abs(ev).max(axis=1, keepdims=True), 1e-300)
    pos = np.where(ev > rel_tol * scale, ev, 0.0)
    r = int(np.max(np.count_nonzero(pos, axis=1))) if N else 0
    pos = np.sort(pos, axis=1)[:, ::-1][:, :r]
    return pos, r


def _monomial_family(gbar, mu0):
    k, l = mu0.monomial
    if k == l:
        c = 1.0 / (math.pi * k * k)

        def nu(q):
            y = np.asarray(q, float)[..., -1]
            return c * np.abs(y) ** (1.0 / k)

        def section(q):
            y = Fraction(q[-1]) if not isinstance(q[-1], float) else q[-1]
            vals = [0] * gbar.dim
            vals[mu0.center_index] = y
            return _functional(gbar, vals)

        return QuotientFamily("MonomialChain", gbar, ("y",), "y != 0",
                              f"(pi k^2)^-1 |y|^(1/k) dy, k={k}", nu, section,
                              {"k": k, "l": l, "template": "-d^2/dx^2 + y^2 x^2"})

    def nu(q):
        return np.full(np.shape(q)[:-1], 1.0 / (2 * math.pi))

    def section(q):
        xi2, x2 = q
        vals = [0] * gbar.dim
        # the point psi(0, xi2, 0, x2) of the surviving chart
        pt = [0, xi2, 0, x2]
        for i, p in enumerate(mu0.survivors_bar):
            vals[i] = p(*pt)
        return _functional(gbar, vals)

    return QuotientFamily("MonomialChain", gbar, ("xi2", "x2"), "R x (R \\ 0)",
                          "(2pi)^-1 dxi2 dx2", nu, section,
                          {"k": k, "l": l,
                           "template": f"-d^2/dy^2 + (x2^{l} y^{k + 1}/{k + 1} + xi2)^2"})


def _triangular_family(gbar, mu0):
    """4-dim filiform quotient: chain L2 -> X -> Y under ad L1, Y central."""
    if gbar.dim != 4 or gbar.n != 2:
        raise UnsupportedStructure("triangular family needs a 4-dim quotient with two generators")
    L1, L2 = gbar.generators
    X = gbar.bracket(L1, L2)
    Y = gbar.bracket(L1, X)
    if not any(X) or not any(Y) or any(gbar.bracket(L1, Y)) or any(gbar.bracket(L2, X)) \
            or any(gbar.bracket(L2, Y)):
        raise UnsupportedStructure("quotient is not the triangular chain")
    basis = [L1, L2, X, Y]
    M = qlinalg.transpose([list(v) for v in basis])
    det = _det(M)
    if det == 0:
        raise UnsupportedStructure("chain does not span the quotient")
    # chain functionals F1 = f(L2), F2 = f(X), F3 = f(Y); along the orbit
    # f(L2) moves as F1 + F2 z + F3 z^2 / 2, so a = F3 / 2, b = F1 - F2^2 / (2 F3)
    coord_scale = abs(float(det))

    def invariants(f):
        F2, F3 = f(X), f(Y)
        a = F3 / 2
        return a, f(L2) - F2 * F2 / (2 * F3)

    def section(q):
        a, b = q
        # f(L1) = 0, f(L2) = b, f(X) = 0, f(Y) = 2a, written in the gbar basis
        target = [0, b, 0, 2 * a]
        Minv_t = qlinalg.transpose(M)
        vals = qlinalg.solve(Minv_t, [Fraction(t) for t in target]) \
            if all(isinstance(t, (int, Fraction)) for t in target) else \
            list(np.linalg.solve(np.array(Minv_t, float), np.array(target, float)))
        return _functional(gbar, vals)

    # Lebesgue on gbar* in basis-dual coordinates vs chain coordinates: |det|;
    # disintegration (zeta, z, a, b) -> (zeta, a z^2 + b, 2 a z, 2 a) has Jacobian 4|a|
    # mu0 = flat/|det| dF = [(2pi)^-1 dzeta dz] * [2pi * 4 flat / |det| |a| da db]
    nu_const = 2 * math.pi * 4.0 * mu0.flat_density / coord_scale

    def nu(q):
        a = np.asarray(q, float)[..., 0]
        return nu_const * np.abs(a)

    return QuotientFamily("TriangularChain", gbar, ("a", "b"), "(R \\ 0) x R",
                          f"{nu_const / 1.0:.12g} |a| da db", nu, section,
                          {"invariants": invariants, "nu_const": nu_const,
                           "template": "-d^2/dz^2 + (a z^2 + b)^2"})


def _det(M):
    R = [list(r) for r in M]
    n = len(R)
    det = Fraction(1)
    for c in range(n):
        p = next((i for i in range(c, n) if R[i][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            R[c], R[p] = R[p], R[c]
            det = -det
        det *= R[c][c]
        for i in range(c + 1, n):
            fct = R[i][c] / R[c][c]
            R[i] = [x - fct * y for x, y in zip(R[i], R[c])]
    return det
