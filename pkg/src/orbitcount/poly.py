"""Exact multivariate polynomials over Q, a small expression parser and
quasi-homogeneous weights.

Polynomials are immutable.  Exponent tuples index the terms; coefficients
are ``Fraction`` and never zero.  The text form (``str(p)``) is the same
grammar the parser reads, so ``parse(str(p), p.nvars) == p``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from . import qlinalg
from .errors import NegativeExponent, NotQuasiHomogeneous, PolySyntaxError, VariableOutOfRange


def grlex_key(alpha):
    # larger key = larger monomial; x1 > x2 > ... inside a degree
    return (sum(alpha), alpha)


class MultiPoly:
    __slots__ = ("nvars", "_terms", "_hash")

    def __init__(self, nvars: int, terms=None):
        if nvars < 0:
            raise ValueError("nvars must be nonnegative")
        self.nvars = nvars
        clean = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(e) for e in alpha)
            if len(alpha) != nvars:
                raise ValueError(f"exponent {alpha} does not match nvars={nvars}")
            if any(e < 0 for e in alpha):
                raise NegativeExponent(f"negative exponent in {alpha}")
            c = Fraction(c)
            if c != 0:
                clean[alpha] = clean.get(alpha, Fraction(0)) + c
        self._terms = {a: c for a, c in clean.items() if c != 0}
        self._hash = None

    # construction helpers
    @classmethod
    def zero(cls, nvars):
        return cls(nvars)

    @classmethod
    def const(cls, c, nvars):
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, j, nvars):
        """The coordinate x_j, 1-based."""
        if not 1 <= j <= nvars:
            raise VariableOutOfRange(f"x{j} with nvars={nvars}")
        alpha = [0] * nvars
        alpha[j - 1] = 1
        return cls(nvars, {tuple(alpha): 1})

    @property
    def terms(self):
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def is_zero(self):
        return not self._terms

    def coefficient(self, alpha):
        return self._terms.get(tuple(alpha), Fraction(0))

    def constant_term(self):
        return self.coefficient((0,) * self.nvars)

    def degree(self):
        """Total degree; -1 for the zero polynomial."""
        return max((sum(a) for a in self._terms), default=-1)

    def degree_in(self, j):
        return max((a[j - 1] for a in self._terms), default=-1)

    def monomials(self):
        return sorted(self._terms, key=grlex_key, reverse=True)

    def leading_monomial(self):
        if not self._terms:
            return None
        return max(self._terms, key=grlex_key)

    def leading_coefficient(self):
        lm = self.leading_monomial()
        return Fraction(0) if lm is None else self._terms[lm]

    def is_constant(self):
        return all(sum(a) == 0 for a in self._terms)

    # ring operations
    def _coerce(self, other):
        if isinstance(other, MultiPoly):
            if other.nvars != self.nvars:
                raise ValueError("nvars mismatch")
            return other
        if isinstance(other, (int, Fraction)):
            return MultiPoly.const(other, self.nvars)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        t = dict(self._terms)
        for a, c in other._terms.items():
            t[a] = t.get(a, Fraction(0)) + c
        return MultiPoly(self.nvars, t)

    __radd__ = __add__

    def __neg__(self):
        return MultiPoly(self.nvars, {a: -c for a, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return MultiPoly(self.nvars, {a: c * other for a, c in self._terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        t = {}
        for a, c in self._terms.items():
            for b, d in other._terms.items():
                ab = tuple(x + y for x, y in zip(a, b))
                t[ab] = t.get(ab, Fraction(0)) + c * d
        return MultiPoly(self.nvars, t)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, MultiPoly):
            if not other.is_constant() or other.is_zero():
                raise ZeroDivisionError("can only divide by a nonzero constant")
            other = other.constant_term()
        other = Fraction(other)
        if other == 0:
            raise ZeroDivisionError("division by zero")
        return self * (1 / other)

    def __pow__(self, k):
        if not isinstance(k, int):
            raise TypeError("integer exponent required")
        if k < 0:
            raise NegativeExponent(f"exponent {k}")
        result = MultiPoly.const(1, self.nvars)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = MultiPoly.const(other, self.nvars)
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.nvars, frozenset(self._terms.items())))
        return self._hash

    # calculus
    def partial(self, j):
        """Exact partial derivative in x_j (1-based)."""
        if not 1 <= j <= self.nvars:
            raise VariableOutOfRange(f"x{j} with nvars={self.nvars}")
        i = j - 1
        t = {}
        for a, c in self._terms.items():
            if a[i]:
                b = a[:i] + (a[i] - 1,) + a[i + 1:]
                t[b] = c * a[i]
        return MultiPoly(self.nvars, t)

    def derivative(self, alpha):
        p = self
        for j, k in enumerate(alpha, start=1):
            for _ in range(k):
                p = p.partial(j)
        return p

    def all_derivatives(self):
        """Map alpha -> d^alpha p over every multi-index with a nonzero result."""
        out = {}
        frontier = [((0,) * self.nvars, self)]
        while frontier:
            nxt = []
            for alpha, p in frontier:
                if alpha in out or p.is_zero():
                    continue
                out[alpha] = p
                for j in range(self.nvars):
                    beta = alpha[:j] + (alpha[j] + 1,) + alpha[j + 1:]
                    if beta not in out:
                        nxt.append((beta, p.partial(j + 1)))
            frontier = nxt
        return out

    # evaluation
    def __call__(self, *point):
        """Exact evaluation at a rational point."""
        if len(point) == 1 and isinstance(point[0], (list, tuple)):
            point = tuple(point[0])
        if len(point) != self.nvars:
            raise ValueError("point has wrong length")
        pt = []
        for v in point:
            if isinstance(v, float):
                raise TypeError("exact evaluation needs rationals; use feval for floats")
            pt.append(Fraction(v))
        total = Fraction(0)
        for a, c in self._terms.items():
            term = c
            for v, e in zip(pt, a):
                if e:
                    term *= v ** e
            total += term
        return total

    def feval(self, X):
        """Floating point evaluation (lossy).

        ``X`` has shape (..., nvars); the result has shape X.shape[:-1].
        """
        X = np.asarray(X, dtype=float)
        if self.nvars == 0:
            return np.full(X.shape[:-1], float(self.constant_term()))
        if X.shape[-1] != self.nvars:
            raise ValueError("last axis must have length nvars")
        out = np.zeros(X.shape[:-1])
        if not self._terms:
            return out
        maxdeg = [self.degree_in(j + 1) for j in range(self.nvars)]
        powers = []
        for j in range(self.nvars):
            pj = [np.ones(X.shape[:-1])]
            for _ in range(max(maxdeg[j], 0)):
                pj.append(pj[-1] * X[..., j])
            powers.append(pj)
        for a, c in self._terms.items():
            term = np.full(X.shape[:-1], float(c))
            for j, e in enumerate(a):
                if e:
                    term = term * powers[j][e]
            out = out + term
        return out

    # structure
    def substitute(self, images: Sequence["MultiPoly"]):
        """Compose: replace x_j by images[j-1] (all in a common ring)."""
        if len(images) != self.nvars:
            raise ValueError("need one image per variable")
        if not images:
            return self
        m = images[0].nvars
        out = MultiPoly.zero(m)
        cache = {}
        for a, c in self._terms.items():
            term = MultiPoly.const(c, m)
            for j, e in enumerate(a):
                if e:
                    key = (j, e)
                    if key not in cache:
                        cache[key] = images[j] ** e
                    term = term * cache[key]
            out = out + term
        return out

    def coeffs_in(self, j):
        """Split p = sum_d c_d * x_j^d; returns {d: c_d} with c_d free of x_j."""
        i = j - 1
        parts = {}
        for a, c in self._terms.items():
            b = a[:i] + (0,) + a[i + 1:]
            parts.setdefault(a[i], {})[b] = c
        return {d: MultiPoly(self.nvars, t) for d, t in parts.items()}

    def embed(self, nvars, positions):
        """Re-express in a ring with ``nvars`` variables; x_j goes to slot positions[j-1]."""
        t = {}
        for a, c in self._terms.items():
            b = [0] * nvars
            for j, e in enumerate(a):
                b[positions[j] - 1] += e
            t[tuple(b)] = t.get(tuple(b), 0) + c
        return MultiPoly(nvars, t)

    def variables(self):
        return sorted({j + 1 for a in self._terms for j, e in enumerate(a) if e})

    def __repr__(self):
        return f"MultiPoly({self.nvars}, {str(self)!r})"

    def __str__(self):
        return to_text(self)


def _fmt_rational(c: Fraction):
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _fmt_monomial(alpha, names):
    parts = []
    for j, e in enumerate(alpha):
        if e == 1:
            parts.append(names[j])
        elif e > 1:
            parts.append(f"{names[j]}^{e}")
    return "*".join(parts)


def to_text(p: MultiPoly, names=None):
    """Canonical text: graded-lex descending, exact rational coefficients."""
    names = names or [f"x{j + 1}" for j in range(p.nvars)]
    if p.is_zero():
        return "0"
    out = []
    for k, alpha in enumerate(p.monomials()):
        c = p.coefficient(alpha)
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        mono = _fmt_monomial(alpha, names)
        if not mono:
            body = _fmt_rational(mag)
        elif mag == 1:
            body = mono
        else:
            body = f"{_fmt_rational(mag)}*{mono}"
        if k == 0:
            out.append(body if sign == "+" else "-" + body)
        else:
            out.append(f" {sign} {body}")
    return "".join(out)


# --- parser -----------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)|(?P<var>x\d+)|(?P<op>[-+*/^()]))")


def _tokenize(text):
    pos = 0
    toks = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise PolySyntaxError(f"unexpected character {text[bad]!r}", text, bad)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), start))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text, nvars):
        self.text = text
        self.nvars = nvars
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise PolySyntaxError(msg, self.text, tok[2])

    def is_op(self, ch):
        k, v, _ = self.peek()
        return k == "op" and v == ch

    def parse(self):
        if self.peek()[0] == "end":
            self.fail("empty expression")
        p = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected {self.peek()[1]!r}")
        return p

    def expr(self):
        p = self.term()
        while self.is_op("+") or self.is_op("-"):
            op = self.take()[1]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self):
        p = self.unary()
        while self.is_op("*") or self.is_op("/"):
            tok = self.take()
            q = self.unary()
            if tok[1] == "*":
                p = p * q
            else:
                if q.is_zero():
                    self.fail("division by zero", tok)
                if not q.is_constant():
                    self.fail("division by a non-constant expression", tok)
                p = p / q
        return p

    def unary(self):
        if self.is_op("-"):
            self.take()
            return -self.unary()
        if self.is_op("+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.is_op("^"):
            self.take()
            neg = False
            if self.is_op("-"):
                self.take()
                neg = True
            elif self.is_op("+"):
                self.take()
            kind, val, pos = self.peek()
            if kind != "num" or not val.isdigit():
                self.fail("exponent must be a nonnegative integer literal")
            self.take()
            if neg and int(val) != 0:
                raise NegativeExponent(f"negative exponent -{val} at position {pos}")
            return base ** int(val)
        return base

    def atom(self):
        kind, val, pos = self.peek()
        if kind == "num":
            self.take()
            return MultiPoly.const(Fraction(val), self.nvars)
        if kind == "var":
            self.take()
            j = int(val[1:])
            if not 1 <= j <= self.nvars:
                raise VariableOutOfRange(f"{val} at position {pos} (nvars={self.nvars})")
            return MultiPoly.var(j, self.nvars)
        if self.is_op("("):
            self.take()
            p = self.expr()
            if not self.is_op(")"):
                self.fail("expected ')'")
            self.take()
            return p
        if kind == "end":
            self.fail("unexpected end of input")
        self.fail(f"unexpected {val!r}")


def parse(text: str, nvars: int) -> MultiPoly:
    """Parse a polynomial expression in x1..x{nvars}."""
    return _Parser(text, nvars).parse()


# --- quasi-homogeneity --------------------------------------------------------

@dataclass(frozen=True)
class WeightVector:
    gamma: tuple                     # canonical representative, Fractions
    kind: str                        # "point" or "polytope"
    dimension: int                   # dimension of the affine solution set
    particular: tuple = ()
    directions: tuple = field(default=())

    @property
    def total(self):
        """|gamma| = sum of weights."""
        return sum(self.gamma, Fraction(0))

    def degree_of(self, alpha):
        return sum((Fraction(a) * g for a, g in zip(alpha, self.gamma)), Fraction(0))


def _min_norm_point(rows, rhs):
    """Exact minimum Euclidean norm solution of rows * g = rhs."""
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    R, piv = qlinalg.rref(aug, len(rows[0]) + 1)
    n = len(rows[0])
    if n in piv:
        return None, R
    A = [r[:n] for r in R]
    b = [r[n] for r in R]
    # g = A^T (A A^T)^{-1} b, A has independent rows after rref
    AAt = qlinalg.matmul(A, qlinalg.transpose(A))
    w = qlinalg.solve(AAt, b)
    g = [sum((A[i][j] * w[i] for i in range(len(A))), Fraction(0)) for j in range(n)]
    return g, R


def quasi_weights(generators: Iterable[MultiPoly]) -> WeightVector:
    """Weights gamma > 0 with <beta, gamma> = 1 for every monomial beta.

    On a positive-dimensional solution set the minimum-norm point is
    returned when it is strictly positive.
    """
    gens = [g for g in generators]
    if not gens or any(g.is_zero() for g in gens):
        raise NotQuasiHomogeneous("generators must be nonzero")
    n = gens[0].nvars
    monos = sorted({a for g in gens for a in g.monomials()}, key=grlex_key, reverse=True)
    rows = [[Fraction(e) for e in a] for a in monos]
    rhs = [Fraction(1)] * len(rows)
    g, _ = _min_norm_point(rows, rhs)
    if g is None:
        raise NotQuasiHomogeneous("no weight solves <beta, gamma> = 1 for every monomial")
    null = qlinalg.nullspace(rows, n)
    if not all(x > 0 for x in g):
        g = _positive_representative(rows, g, null)
    kind = "point" if not null else "polytope"
    return WeightVector(tuple(g), kind, len(null), tuple(g), tuple(tuple(v) for v in null))


def _positive_representative(rows, g0, null):
    """Fallback when the minimum-norm point touches the boundary.

    Solves max t s.t. A g = 1, g >= t with an LP, rounds to a nearby
    rational and projects back onto the affine set exactly.
    """
    if not null:
        raise NotQuasiHomogeneous("the unique weight is not positive")
    from scipy.optimize import linprog

    n = len(g0)
    A = np.array([[float(v) for v in r] for r in rows])
    # variables (g_1..g_n, t); maximize t
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-np.eye(n), np.ones((n, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n), A_eq=np.hstack([A, np.zeros((len(rows), 1))]),
                  b_eq=np.ones(len(rows)), bounds=[(None, None)] * n + [(None, 1.0)])
    if not res.success or res.x[-1] <= 1e-12:
        raise NotQuasiHomogeneous("no strictly positive weight exists")
    approx = [Fraction(float(v)).limit_denominator(10 ** 6) for v in res.x[:n]]
    # exact projection back onto A g = 1 along the minimum-norm correction
    resid = [1 - sum((Fraction(a) * x for a, x in zip(r, approx)), Fraction(0)) for r in rows]
    g_shift, _ = _min_norm_point(rows, resid)
    g = [a + s for a, s in zip(approx, g_shift)]
    if not all(x > 0 for x in g):
        raise NotQuasiHomogeneous("could not find an exact positive weight")
    return g


def weight_denominator(w: WeightVector):
    return reduce(math.lcm, (Fraction(x).denominator for x in w.gamma), 1)


def dilation_identity_holds(p: MultiPoly, w: WeightVector) -> bool:
    """Check P(t^{gamma_j D} x_j) == t^D P(x) as a polynomial identity in (x, t)."""
    n = p.nvars
    D = weight_denominator(w)
    t = MultiPoly.var(n + 1, n + 1)
    images = [MultiPoly.var(j + 1, n + 1) * t ** int(w.gamma[j] * D) for j in range(n)]
    lhs = p.substitute(images)
    rhs = p.embed(n + 1, list(range(1, n + 1))) * t ** D
    return lhs == rhs
