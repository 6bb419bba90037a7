"""Volumes of polynomial sublevel sets {z : sum_i |P_i(z)|^p_i <= T}.

Conditional Monte Carlo: one "fiber" variable is integrated exactly
(breakpoints from polynomial roots, then crossing points by bisection),
the remaining variables are sampled from a defensive mixture on a bounding
interval.  Variables that enter only as a single linear square (the xi
directions of an orbit chart) are integrated analytically as a ball.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import UnboundedSublevelSet
from .poly import MultiPoly

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


@njit(cache=True)
def _real_roots(c, out, k):
    """Append real roots of sum c[i] t^i to out starting at k; returns new k."""
    d = len(c) - 1
    # the constant term is excluded from the scale: it can be huge at far sample points
    scale = 0.0
    for v in c[1:]:
        scale = max(scale, abs(v))
    if scale == 0.0:
        return k
    while d > 0 and abs(c[d]) <= 1e-14 * scale:
        d -= 1
    if d == 0:
        return k
    if d == 1:
        out[k] = -c[0] / c[1]
        return k + 1
    if d == 2:
        a, b, cc = c[2], c[1], c[0]
        disc = b * b - 4 * a * cc
        if disc < 0:
            if disc > -1e-14 * b * b:
                out[k] = -b / (2 * a)
                return k + 1
            return k
        sq = math.sqrt(disc)
        q = -0.5 * (b + sq) if b >= 0 else -0.5 * (b - sq)
        if q != 0.0:
            out[k] = q / a
            out[k + 1] = cc / q
            return k + 2
        out[k] = 0.0
        return k + 1
    hi = np.empty(d + 1)
    for i in range(d + 1):
        hi[i] = c[d - i]
    r = np.roots(hi.astype(np.complex128))
    for z in r:
        if abs(z.imag) <= 1e-9 * (1.0 + abs(z.real)):
            out[k] = z.real
            k += 1
    return k


@njit(cache=True)
def _Q(coef, pw, t):
    s = 0.0
    K, D1 = coef.shape
    for i in range(K):
        v = 0.0
        for j in range(D1 - 1, -1, -1):
            v = v * t + coef[i, j]
        s += abs(v) ** pw[i]
    return s


@njit(cache=True)
def _fiber_nodes(coef, pw, T, sub):
    """Sorted breakpoints on the fiber; T - Q keeps one sign between neighbours.

    Returns (nodes, status) with status 0 ok, 1 empty, 2 unbounded.
    """
    K, D1 = coef.shape
    lo = -np.inf
    hi = np.inf
    bounded = False
    buf = np.empty(K * 4 * D1 + 8)
    tmp = np.empty(D1 + 2)
    for i in range(K):
        deg = 0
        mx = 0.0
        for j in range(1, D1):
            mx = max(mx, abs(coef[i, j]))
        for j in range(1, D1):
            if abs(coef[i, j]) > 1e-14 * mx:
                deg = j
        if deg == 0:
            continue
        bounded = True
        lev = T ** (1.0 / pw[i])
        kk = 0
        for sgn in (-1.0, 1.0):
            for j in range(D1):
                tmp[j] = coef[i, j]
            tmp[0] -= sgn * lev
            kk = _real_roots(tmp[:D1], buf, kk)
        if kk == 0:
            return [0.0], 1
        a = buf[0]
        b = buf[0]
        for j in range(kk):
            a = min(a, buf[j])
            b = max(b, buf[j])
        lo = max(lo, a)
        hi = min(hi, b)
    if not bounded:
        if _Q(coef, pw, 0.0) <= T:
            return [0.0], 2
        return [0.0], 1
    if hi <= lo:
        return [0.0], 1
    # breakpoints: roots of every term and of its derivative
    kk = 0
    for i in range(K):
        for j in range(D1):
            tmp[j] = coef[i, j]
        kk = _real_roots(tmp[:D1], buf, kk)
        for j in range(D1 - 1):
            tmp[j] = (j + 1) * coef[i, j + 1]
        kk = _real_roots(tmp[:D1 - 1], buf, kk)
    pts = [lo, hi]
    for j in range(kk):
        if lo < buf[j] < hi:
            pts.append(buf[j])
    pts.sort()
    # crossings of T - Q on a subgrid of each piece
    nodes = [pts[0]]
    for p in range(len(pts) - 1):
        u0 = pts[p]
        u1 = pts[p + 1]
        if u1 <= u0:
            continue
        prev_t = u0
        prev_g = T - _Q(coef, pw, u0)
        for s in range(1, sub + 1):
            t = u0 + (u1 - u0) * s / sub
            g = T - _Q(coef, pw, t)
            if (prev_g < 0) != (g < 0):
                a = prev_t
                b = t
                ga = prev_g
                for _ in range(60):
                    m = 0.5 * (a + b)
                    gm = T - _Q(coef, pw, m)
                    if (gm < 0) == (ga < 0):
                        a = m
                        ga = gm
                    else:
                        b = m
                    if b - a <= 1e-15 * (abs(a) + abs(b)) + 1e-300:
                        break
                nodes.append(0.5 * (a + b))
            prev_t = t
            prev_g = g
        nodes.append(u1)
    return nodes, 0


@njit(cache=True)
def _fiber_one(coef, pw, T, dball, sub, glx, glw):
    """Integral over t of (T - Q(t))_+^(dball/2) (indicator when dball = 0).

    Returns (value, unbounded flag).
    """
    nodes, status = _fiber_nodes(coef, pw, T, sub)
    if status:
        return 0.0, status == 2
    total = 0.0
    for p in range(len(nodes) - 1):
        a = nodes[p]
        b = nodes[p + 1]
        if b <= a:
            continue
        if T - _Q(coef, pw, 0.5 * (a + b)) < 0:
            continue
        if dball == 0:
            total += b - a
        else:
            acc = 0.0
            for q in range(len(glx)):
                # cosine clustering at both ends tames the square-root edges
                th = 0.5 * math.pi * (glx[q] + 1.0)
                x = a + (b - a) * 0.5 * (1.0 - math.cos(th))
                jac = (b - a) * 0.25 * math.pi * math.sin(th)
                g = T - _Q(coef, pw, x)
                if g > 0:
                    acc += glw[q] * jac * g ** (0.5 * dball)
            total += acc
    return total, False


@njit(cache=True)
def _fiber_batch(coefs, pw, T, dball, sub, glx, glw):
    N = coefs.shape[0]
    out = np.zeros(N)
    unb = np.zeros(N, dtype=np.bool_)
    for n in range(N):
        v, u = _fiber_one(coefs[n], pw, T, dball, sub, glx, glw)
        out[n] = v
        unb[n] = u
    return out, unb


@njit(cache=True)
def _interval_batch(coefs, pw, T, sub):
    N = coefs.shape[0]
    lo = []
    hi = []
    row = []
    bad = 0
    for n in range(N):
        nodes, status = _fiber_nodes(coefs[n], pw, T, sub)
        if status == 2:
            bad += 1
            lo.append(-np.inf)
            hi.append(np.inf)
            row.append(n)
        if status:
            continue
        open_ = False
        for p in range(len(nodes) - 1):
            a = nodes[p]
            b = nodes[p + 1]
            inside = b > a and T - _Q(coefs[n], pw, 0.5 * (a + b)) >= 0
            if inside and open_ and lo[-1] <= a and hi[-1] >= a:
                hi[-1] = b
            elif inside:
                lo.append(a)
                hi.append(b)
                row.append(n)
                open_ = True
            else:
                open_ = False
    return np.array(lo), np.array(hi), np.array(row, dtype=np.int64), bad


def _vars0(P):
    return {j - 1 for j in P.variables()}


def _unit_ball(d):
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@dataclass
class SublevelProblem:
    """sum_i |P_i|^p_i <= T over R^m, with constants folded into an offset."""
    terms: list           # (MultiPoly, p) with nonconstant P
    offset: float         # sum of |c|^p over constant terms
    nvars: int

    @classmethod
    def from_terms(cls, terms, nvars):
        keep, off = [], 0.0
        for P, p in terms:
            if P.is_zero():
                continue
            if P.is_constant():
                off += abs(float(P.constant_term())) ** p
            else:
                keep.append((P, float(p)))
        return cls(keep, off, nvars)


class SublevelVolume:
    """Prepared estimator; call ``estimate(T, samples, seed)``."""

    def __init__(self, problem: SublevelProblem, fiber=None, sub=12):
        self.problem = problem
        self.sub = sub
        m = problem.nvars
        terms = problem.terms
        # analytic ball variables: single linear square term, variable used nowhere else
        ball, ball_c = [], []
        for idx, (P, p) in enumerate(terms):
            if p == 2.0 and len(P.terms) == 1:
                (alpha, c), = P.items()
                if sum(alpha) == 1:
                    v = alpha.index(1)
                    others = [Q for j, (Q, _) in enumerate(terms) if j != idx and v in _vars0(Q)]
                    if not others and v not in ball:
                        ball.append(v)
                        ball_c.append(abs(float(c)))
        self.ball = ball
        self.ball_factor = _unit_ball(len(ball)) / float(np.prod(ball_c)) if ball else 1.0
        self.rest_terms = [(P, p) for P, p in terms
                           if not (len(P.terms) == 1 and p == 2.0 and _vars0(P) and _vars0(P) <= set(ball))]
        rest_vars = sorted(set(range(m)) - set(ball))
        self.rest_vars = rest_vars
        if not rest_vars:
            self.fiber = None
            self.outer = []
            return
        standalone = {v: self._standalone_terms(v) for v in rest_vars}
        if fiber is None:
            def rank(v):
                deg = max((P.degree_in(v + 1) for P, _ in self.rest_terms), default=0)
                return (bool(standalone[v]), deg, -v)
            fiber = min(rest_vars, key=rank)
        self.fiber = fiber
        self.outer = [v for v in rest_vars if v != fiber]
        self.jacobian = self._shear()
        self.standalone = {v: self._standalone_terms(v) for v in rest_vars}
        D = max((P.degree_in(fiber + 1) for P, _ in self.rest_terms), default=0)
        self.D = D
        self.ball_factor *= self.jacobian
        self.coeff_polys = []
        for P, p in self.rest_terms:
            parts = P.coeffs_in(fiber + 1)
            self.coeff_polys.append([parts.get(d) for d in range(D + 1)])
        self.pw = np.array([p for _, p in self.rest_terms], float)

    def _standalone_terms(self, v):
        return [(P, p) for P, p in self.rest_terms if _vars0(P) == {v}]

    def _shear(self):
        """If a term is a*x_f + b(outer) with constant a, switch the fiber variable to
        u = a*x_f + b.  Far out, b is huge and the fiber set is a thin slab around
        -b/a; solving in x_f directly cancels away every significant digit."""
        f = self.fiber + 1
        for P, _ in self.rest_terms:
            if P.degree_in(f) != 1:
                continue
            parts = P.coeffs_in(f)
            a = parts.get(1)
            b = parts.get(0)
            if a is None or not a.is_constant() or b is None or b.is_constant():
                continue
            m = self.problem.nvars
            x = [MultiPoly.var(j + 1, m) for j in range(m)]
            x[self.fiber] = (x[self.fiber] - b) / a.constant_term()
            self.rest_terms = [(Q.substitute(x), q) for Q, q in self.rest_terms]
            return 1.0 / abs(float(a.constant_term()))
        return 1.0

    def _bound(self, v, T):
        return axis_bound(self.standalone[v], v, T, self.problem.nvars)

    def _coef_array(self, Z):
        N = Z.shape[0]
        K = len(self.rest_terms)
        C = np.zeros((N, K, self.D + 1))
        for i, parts in enumerate(self.coeff_polys):
            for d, q in enumerate(parts):
                if q is not None:
                    C[:, i, d] = q.feval(Z)
        return C

    def _fiber_values(self, Z, T):
        C = self._coef_array(Z)
        vals, unb = _fiber_batch(C, self.pw, T, len(self.ball), self.sub, _GL_X, _GL_W)
        if unb.any():
            raise UnboundedSublevelSet(
                f"fiber in x{self.fiber + 1} is unbounded at {int(unb.sum())} sample points")
        return vals

    def estimate(self, T, samples=20000, seed=0, blocks=16, radii=None):
        """Returns (estimate, stderr) of the volume of {Q <= T}."""
        T = float(T) - self.problem.offset
        if T <= 0:
            return 0.0, 0.0
        if self.fiber is None:
            return self.ball_factor * T ** (len(self.ball) / 2), 0.0
        m = self.problem.nvars
        if not self.outer:
            Z = np.zeros((1, m))
            v = self._fiber_values(Z, T)[0]
            return self.ball_factor * v, 0.0
        R = []
        for v in self.outer:
            r = None if radii is None else radii.get(v)
            if r is None:
                r = self._bound(v, T) if self.standalone[v] else None
            R.append(r)
        if any(r is None for r in R):
            return self._estimate_doubling(T, samples, seed, blocks, R)
        return self._estimate_box(T, samples, seed, blocks, R)

    def _estimate_box(self, T, samples, seed, blocks, R):
        m = self.problem.nvars
        per = max(samples // blocks, 1)
        means = []
        for b in range(blocks):
            rng = np.random.default_rng([int(seed), b])
            U = rng.random((per, len(self.outer)))
            if len(self.outer) == 1:
                U[:, 0] = (np.arange(per) + U[:, 0]) / per
            Z = np.zeros((per, m))
            w = np.ones(per)
            for k, v in enumerate(self.outer):
                t, q = _mixture(U[:, k], R[k])
                Z[:, v] = t
                w /= q
            if all(r == 0 for r in R):
                means.append(0.0)
                continue
            vals = self._fiber_values(Z, T)
            means.append(float(np.mean(vals * w)))
        means = np.array(means)
        est = self.ball_factor * means.mean()
        err = self.ball_factor * means.std(ddof=1) / math.sqrt(blocks) if blocks > 1 else 0.0
        return float(est), float(err)

    def _estimate_doubling(self, T, samples, seed, blocks, R):
        prev = None
        r0 = 1.0
        for k in range(48):
            Rk = [r if r is not None else r0 * 2.0 ** k for r in R]
            est, err = self._estimate_box(T, samples, seed, blocks, Rk)
            if prev is not None and abs(est - prev) <= 1e-3 * max(abs(est), 1e-300) + 3 * err:
                return est, err
            prev = est
        raise UnboundedSublevelSet("tail mass does not decay under box doubling")


def _mixture(u, R, frac=0.5):
    """Map uniforms to the defensive mixture on [-R, R]; returns (t, density)."""
    s = min(1.0, R / 4.0) if R > 0 else 1.0
    L = math.log((R + s) / s) if R > 0 else 1.0
    t = np.empty_like(u)
    uni = u < frac
    t[uni] = (u[uni] / frac) * 2 * R - R
    v = (u[~uni] - frac) / (1 - frac)
    neg = v < 0.5
    w = np.where(neg, 2 * v, 2 * v - 1)
    mag = s * ((R + s) / s) ** w - s
    t[~uni] = np.where(neg, -mag, mag)
    q = frac / (2 * R) + (1 - frac) / (2 * (np.abs(t) + s) * L)
    return t, q


def axis_bound(standalone, v, T, nvars):
    """Half-width in x_v implied by the terms that depend on x_v alone
    (None when there are none, 0.0 when the set is empty)."""
    best = None
    for P, p in standalone:
        lev = T ** (1.0 / p)
        coeffs = [float(P.coefficient(tuple(d if j == v else 0 for j in range(nvars))))
                  for d in range(P.degree() + 1)]
        R = 0.0
        found = False
        for s in (-1.0, 1.0):
            c = list(coeffs)
            c[0] -= s * lev
            r = np.roots(c[::-1])
            r = r[np.abs(r.imag) <= 1e-9 * (1 + np.abs(r.real))].real
            if len(r):
                found = True
                R = max(R, float(np.max(np.abs(r))))
        if not found:
            return 0.0
        best = R if best is None else min(best, R)
    return best


def fiber_intervals(problem: SublevelProblem, fiber, Z, T, sub=12, allow_unbounded=False):
    """Intervals of the x_fiber line through each row of Z where the sublevel
    inequality holds.  Returns (lo, hi, row) with one entry per interval;
    whole lines come back as (-inf, inf) when allow_unbounded is set."""
    T = float(T) - problem.offset
    if T < 0:
        return np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int64)
    if not problem.terms:
        raise UnboundedSublevelSet("no nonconstant terms")
    D = max(P.degree_in(fiber + 1) for P, _ in problem.terms)
    C = np.zeros((Z.shape[0], len(problem.terms), D + 1))
    for i, (P, _) in enumerate(problem.terms):
        for d, q in P.coeffs_in(fiber + 1).items():
            C[:, i, d] = q.feval(Z)
    pw = np.array([p for _, p in problem.terms], float)
    lo, hi, row, bad = _interval_batch(C, pw, T, sub)
    if bad and not allow_unbounded:
        raise UnboundedSublevelSet(f"fiber in x{fiber + 1} is unbounded on {bad} rows")
    return lo, hi, row
