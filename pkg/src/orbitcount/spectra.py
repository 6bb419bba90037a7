"""Eigenvalue counting.

Closed forms (harmonic oscillator, Landau sums, the Colin de Verdiere
density), Sturm-sequence counts for 1D polynomial potentials, and direct
2D/3D counts from the inertia of a finite-difference matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .curves import CountingCurve
from .errors import (DomainTooSmall, FactorizationBreakdown, GridTooCoarse, GridTooLarge, TruncationUnsound,
                     NonConvergent)
from .poly import MultiPoly

__all__ = ["Grid1D", "GridND", "CountingCurve", "count_1d", "harmonic_count", "cdv_density",
           "landau_sum", "count_nd_direct", "weyl_cdv_integral", "unit_ball_volume"]


def unit_ball_volume(d):
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


# --- grids ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid1D:
    L: float
    m: int

    @property
    def h(self):
        return 2 * self.L / (self.m + 1)

    def points(self):
        return -self.L + self.h * np.arange(1, self.m + 1)


@dataclass(frozen=True)
class GridND:
    L: tuple
    m: tuple

    @property
    def h(self):
        return tuple(2 * L / (m + 1) for L, m in zip(self.L, self.m))

    @property
    def size(self):
        return int(np.prod(self.m))

    def axis(self, j):
        return Grid1D(self.L[j], self.m[j])


# --- 1D Sturm counts -------------------------------------------------------------------

@njit(cache=True)
def _horner(c, y):
    v = 0.0
    for j in range(len(c) - 1, -1, -1):
        v = v * y + c[j]
    return v


@njit(cache=True)
def _sturm_poly(coeffs, lam, L, m):
    """Eigenvalues < lam of the Dirichlet 3-point discretization of -d^2 + W on [-L, L]."""
    h = 2 * L / (m + 1)
    inv = 1.0 / (h * h)
    off2 = inv * inv
    cnt = 0
    q = 1.0
    tiny = 1e-300
    for i in range(m):
        y = -L + h * (i + 1)
        d = 2 * inv + _horner(coeffs, y) - lam
        if i == 0:
            q = d
        else:
            q = d - off2 / q
        if q == 0.0:
            q = tiny
        if q < 0:
            cnt += 1
    return cnt


@njit(cache=True)
def _sturm_tridiag(diag, off2, lam):
    cnt = 0
    q = 1.0
    for i in range(len(diag)):
        d = diag[i] - lam
        q = d if i == 0 else d - off2[i - 1] / q
        if q == 0.0:
            q = 1e-300
        if q < 0:
            cnt += 1
    return cnt


def _coeffs_1d(W):
    if isinstance(W, MultiPoly):
        if W.nvars != 1:
            raise ValueError("count_1d needs a one-variable polynomial")
        d = W.degree() if not W.is_zero() else 0
        return np.array([float(W.coefficient((k,))) for k in range(d + 1)])
    return np.asarray(W, float)


def _auto_L(c, lam):
    """Smallest L with W >= 4 lam outside [-L, L]; 0 when W >= 4 lam everywhere."""
    shifted = c.copy()
    shifted[0] -= 4 * lam
    hi = np.trim_zeros(shifted, "b")
    if len(hi) <= 1:
        return None if (len(hi) == 1 and hi[0] < 0) or len(hi) == 0 else 0.0
    r = np.roots(hi[::-1])
    r = r[np.abs(r.imag) <= 1e-9 * (1 + np.abs(r.real))].real
    if len(r) == 0:
        return 0.0 if hi[-1] > 0 else None
    return float(np.max(np.abs(r)))


def resolution_step(lam, c=None, L=None, min_points=64):
    """Largest h allowed by h sqrt(lam) <= 1/4 and h max|W'| <= max(lam, 1) / 2."""
    h = 0.25 / math.sqrt(max(lam, 1e-12))
    if c is not None and L:
        dc = np.array([k * c[k] for k in range(1, len(c))]) if len(c) > 1 else np.zeros(1)
        ys = np.linspace(-L, L, 2001)
        W = np.polynomial.polynomial.polyval(ys, c)
        mask = W <= 4 * lam
        if mask.any():
            slope = float(np.max(np.abs(np.polynomial.polynomial.polyval(ys[mask], dc))))
            if slope > 0:
                h = min(h, 0.5 * max(lam, 1.0) / slope)
        h = min(h, 2 * L / (min_points + 1))
    return h


def count_1d(W, lam, grid: Grid1D | None = None, check=True):
    """N(lam) for -d^2/dy^2 + W(y), counted exactly on the discrete matrix."""
    c = _coeffs_1d(W)
    if lam <= 0 and _nonneg(c):
        return 0
    if grid is None:
        L = _auto_L(c, lam)
        if L is None:
            raise DomainTooSmall("potential does not grow beyond 4 lam")
        if L == 0.0:
            return 0
        L += 6.0 / max(math.sqrt(lam), 1.0)
        h = resolution_step(lam, c, L)
        m = int(math.ceil(2 * L / h)) - 1
        grid = Grid1D(L, max(m, 3))
    elif check:
        L = grid.L
        Lneed = _auto_L(c, lam)
        if Lneed is None or Lneed > L * (1 + 1e-12):
            raise DomainTooSmall(f"W < 4 lam inside |y| <= {Lneed} but box is {L}")
        if grid.h > resolution_step(lam, c, L, min_points=0) * (1 + 1e-12):
            raise GridTooCoarse(f"h = {grid.h:.4g} violates the resolution rule at lam = {lam}")
    return int(_sturm_poly(c, float(lam), float(grid.L), int(grid.m)))


def _nonneg(c):
    # crude: even-degree sum of squares shape is not checked; only used for lam <= 0
    ys = np.linspace(-50, 50, 4001)
    return bool(np.all(np.polynomial.polynomial.polyval(ys, c) >= 0))


# --- closed forms -------------------------------------------------------------------------

def _levels(b, limit):
    """All sums sum_j (2 m_j + 1) b_j <= limit, by a bounded lattice walk."""
    b = [float(x) for x in b]
    out = []

    def walk(j, acc):
        if j == len(b):
            out.append(acc)
            return
        m = 0
        while True:
            v = acc + (2 * m + 1) * b[j]
            rest = sum(b[j + 1:])
            if v + rest > limit:
                break
            walk(j + 1, v)
            m += 1
    walk(0, 0.0)
    return out


def harmonic_count(b, shift, lam):
    """#{m in Z_+^r : sum (2 m_j + 1) b_j + shift <= lam}."""
    if any(x <= 0 for x in b):
        raise ValueError("harmonic_count needs b_j > 0")
    return len(_levels(b, lam - shift))


def landau_sum(b, d, lam):
    """|v_d| sum_m (lam - sum (2 m_j + 1) b_j)_+^(d/2)."""
    if d < 1:
        raise ValueError("landau_sum needs d >= 1")
    levels = _levels(b, lam)
    return unit_ball_volume(d) * sum((lam - e) ** (d / 2) for e in levels if lam - e > 0)


def _field_spectrum(B, rel_tol=1e-10):
    B = np.asarray(B, float)
    ev = np.linalg.eigvalsh(1j * B)
    scale = float(np.max(np.abs(ev))) if ev.size else 0.0
    return sorted([float(v) for v in ev if v > rel_tol * scale and scale > 0], reverse=True)


def cdv_density(B, lam):
    """v_B(lam) with (a)_+^0 read as the indicator of a > 0."""
    B = np.asarray(B, float)
    n = B.shape[0]
    b = _field_spectrum(B)
    r = len(b)
    d = n - 2 * r
    pref = (2 * math.pi) ** (-n + r) * unit_ball_volume(d) * float(np.prod(b)) if r else \
        (2 * math.pi) ** (-n) * unit_ball_volume(n)
    if r == 0:
        return pref * (lam ** (n / 2) if lam > 0 else 0.0) if n else float(lam > 0)
    levels = _levels(b, lam)
    if d == 0:
        s = sum(1.0 for e in levels if lam - e > 0)
    else:
        s = sum((lam - e) ** (d / 2) for e in levels if lam - e > 0)
    return pref * s


def _cdv_rank1(b, E, n):
    """Vectorized v_B(E) for a rank-2 tensor with eigenvalue b (arrays)."""
    d = n - 2
    out = np.zeros_like(E)
    pos = (b > 0) & (E > b)
    bb, EE = b[pos], E[pos]
    if d == 0:
        s = np.ceil((EE / bb - 1) / 2)
        s = np.maximum(s, 0)
    elif d == 2:
        M = np.ceil((EE / bb - 1) / 2)
        s = M * EE - bb * M * M
    else:
        M = np.ceil((EE / bb - 1) / 2).astype(int)
        s = np.zeros_like(EE)
        big = M > 20000
        for i in np.nonzero(~big)[0]:
            m = np.arange(M[i])
            s[i] = np.sum((EE[i] - (2 * m + 1) * bb[i]) ** (d / 2))
        if big.any():
            # midpoint rule for the many-level sum
            e, c, Mb = EE[big], bb[big], M[big]
            s[big] = (e ** (d / 2 + 1) - np.maximum(e - 2 * c * Mb, 0) ** (d / 2 + 1)) / ((d + 2) * c)
    out[pos] = (2 * math.pi) ** (-n + 1) * unit_ball_volume(d) * bb * s
    return out


def _cdv_field_values(spec, X, rel_tol=1e-10):
    n = spec.n
    Bp = spec.B
    N = X.shape[0]
    if n == 2:
        b = np.abs(Bp[0][1].feval(X)) if not Bp[0][1].is_zero() else np.zeros(N)
        return b[:, None]
    B = np.zeros((N, n, n))
    for j in range(n):
        for k in range(n):
            if not Bp[j][k].is_zero():
                B[:, j, k] = Bp[j][k].feval(X)
    ev = np.linalg.eigvalsh(1j * B)
    scale = np.max(np.abs(ev), axis=1, keepdims=True)
    ev = np.where(ev > rel_tol * np.maximum(scale, 1e-300), ev, 0.0)
    return np.sort(ev, axis=1)[:, ::-1][:, : n // 2]


def cdv_integrand(spec, X, lam):
    """x -> v_{B(x)}(lam - V(x)) at rows of X."""
    X = np.atleast_2d(np.asarray(X, float))
    n = spec.n
    E = lam - (spec.V.feval(X) if not spec.V.is_zero() else np.zeros(X.shape[0]))
    bv = _cdv_field_values(spec, X)
    r_pt = np.count_nonzero(bv > 0, axis=1)
    out = np.zeros(X.shape[0])
    free = r_pt == 0
    if free.any():
        out[free] = (2 * math.pi) ** (-n) * unit_ball_volume(n) * np.where(E[free] > 0, E[free], 0) ** (n / 2)
    one = r_pt == 1
    if one.any():
        out[one] = _cdv_rank1(bv[one, 0], E[one], n)
    for i in np.nonzero(r_pt >= 2)[0]:
        Bm = np.zeros((n, n))
        for j in range(n):
            for k in range(n):
                if not spec.B[j][k].is_zero():
                    Bm[j, k] = float(spec.B[j][k].feval(X[i]))
        out[i] = cdv_density(Bm, E[i])
    return out


# --- adaptive cubature ----------------------------------------------------------------------

def adaptive_cubature(f, lo, hi, rtol=1e-3, atol=1e-12, init=8, max_cells=400000, order=4):
    """Tensor Gauss-Legendre on adaptively bisected boxes.

    Each cell is integrated with ``order`` and ``order - 2`` points per axis;
    the difference is the error estimate.  Cells with the largest errors
    are split into 2^n children.  Returns (value, error, cells).
    """
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    n = len(lo)
    xh, wh = np.polynomial.legendre.leggauss(order)
    xl, wl = np.polynomial.legendre.leggauss(max(order - 2, 1))

    def rule(x, w):
        grids = np.meshgrid(*([x] * n), indexing="ij")
        P = np.stack([g.ravel() for g in grids], axis=1)
        W = np.ones(len(P))
        wg = np.meshgrid(*([w] * n), indexing="ij")
        for g in wg:
            W = W * g.ravel()
        return P, W

    Ph, Wh = rule(xh, wh)
    Pl, Wl = rule(xl, wl)
    axes = [np.linspace(lo[j], hi[j], init + 1) for j in range(n)]
    mesh = np.meshgrid(*[a[:-1] for a in axes], indexing="ij")
    width = (hi - lo) / init
    c_lo = np.stack([m.ravel() for m in mesh], axis=1)
    c_w = np.tile(width, (len(c_lo), 1))

    def integrate(cl, cw):
        half = cw / 2
        mid = cl + half
        vol = np.prod(cw, axis=1)
        Xh = (mid[:, None, :] + half[:, None, :] * Ph[None]).reshape(-1, n)
        Xl = (mid[:, None, :] + half[:, None, :] * Pl[None]).reshape(-1, n)
        Ih = (f(Xh).reshape(len(cl), -1) @ Wh) * vol / 2 ** n
        Il = (f(Xl).reshape(len(cl), -1) @ Wl) * vol / 2 ** n
        return Ih, np.abs(Ih - Il)

    vals, errs = integrate(c_lo, c_w)
    while True:
        total = float(vals.sum())
        err = float(errs.sum())
        if err <= max(rtol * abs(total), atol):
            return total, err, len(vals)
        if len(vals) > max_cells:
            raise NonConvergent(f"cubature did not reach rtol={rtol} within {max_cells} cells "
                                f"(value {total:.6g}, error {err:.3g})")
        order_idx = np.argsort(errs)[::-1]
        cum = np.cumsum(errs[order_idx])
        k = int(np.searchsorted(cum, 0.5 * err)) + 1
        k = max(k, min(len(vals), 16))
        split = order_idx[:k]
        keep = np.ones(len(vals), bool)
        keep[split] = False
        pl, pw = c_lo[split], c_w[split] / 2
        kids_lo, kids_w = [], []
        for corner in range(2 ** n):
            off = np.array([(corner >> j) & 1 for j in range(n)], float)
            kids_lo.append(pl + off * pw)
            kids_w.append(pw)
        kids_lo = np.concatenate(kids_lo)
        kids_w = np.concatenate(kids_w)
        kv, ke = integrate(kids_lo, kids_w)
        c_lo = np.concatenate([c_lo[keep], kids_lo])
        c_w = np.concatenate([c_w[keep], kids_w])
        vals = np.concatenate([vals[keep], kv])
        errs = np.concatenate([errs[keep], ke])


def weyl_cdv_integral(spec, lam, region="all", rtol=1e-3, R0=None, max_doublings=10,
                      max_cells=400000):
    """int_region v_{B(x)}(lam - V(x)) dx.

    ``region`` is "all" (box doubling until the value settles), a box
    half-width, or a callable mask on points.
    """
    n = spec.n
    mask = region if callable(region) else None

    def f(X):
        v = cdv_integrand(spec, X, lam)
        if mask is not None:
            v = np.where(mask(X), v, 0.0)
        return v

    if isinstance(region, (int, float)) and not isinstance(region, bool):
        R = float(region)
        return adaptive_cubature(f, [-R] * n, [R] * n, rtol=rtol, max_cells=max_cells)[0]
    R = R0 or _support_radius_guess(spec, lam)
    prev = None
    history = []
    for _ in range(max_doublings):
        try:
            val, err, _ = adaptive_cubature(f, [-R] * n, [R] * n, rtol=rtol / 4, max_cells=max_cells)
        except NonConvergent as e:
            raise NonConvergent(f"Weyl/CdV integral unresolved on box R={R:g}: {e}") from None
        history.append((R, val))
        if prev is not None and abs(val - prev) <= rtol * abs(val) / 2:
            return val
        prev = val
        R *= 2
    raise NonConvergent("Weyl/CdV integral keeps growing under box doubling: "
                        + ", ".join(f"R={r:g}: {v:.6g}" for r, v in history))


def _support_radius_guess(spec, lam):
    # radius where V alone reaches lam along the axes, at least 1
    n = spec.n
    R = 1.0
    for j in range(n):
        for s in (-1, 1):
            r = 1.0
            for _ in range(60):
                x = np.zeros((1, n))
                x[0, j] = s * r
                v = float(spec.V.feval(x)[0]) if not spec.V.is_zero() else 0.0
                bmag = float(np.max(_cdv_field_values(spec, x))) if spec.field_components() else 0.0
                if v >= lam or bmag >= lam:
                    R = max(R, r)
                    break
                r *= 1.25
            # an axis that never reaches lam says nothing about the scale; box doubling handles it
    return R


# --- direct n-D counts ------------------------------------------------------------------

@njit(cache=True)
def _band_ldlt_inertia(diag, ptr, cols, vals, w, shift, eps, reach):
    """Negative inertia of A - shift*I for a symmetric band matrix.

    A is given by its diagonal and its strictly lower part in CSR form
    (column indices >= row - w).  Elimination is block LDL^T without
    interchanges (1x1 or 2x2 pivots), streaming through a circular
    (w+2) x (w+2) window.  reach[k] is the last row whose envelope covers
    column k; without interchanges the fill stays inside that envelope, so
    each step only touches rows k..reach[k+1].
    Returns (negatives, zeros, regularized pivots).
    """
    N = len(diag)
    S = w + 2
    Wn = np.zeros((S, S))
    colk = np.zeros(S)
    colk1 = np.zeros(S)
    slots = np.zeros(S, dtype=np.int64)
    alpha_bk = (1.0 + math.sqrt(17.0)) / 8.0
    neg = 0
    zer = 0
    reg = 0

    for r in range(min(S, N)):
        s = r % S
        for j in range(S):
            Wn[s, j] = 0.0
        Wn[s, s] = diag[r] - shift
        for idx in range(ptr[r], ptr[r + 1]):
            Wn[s, cols[idx] % S] = vals[idx]

    k = 0
    while k < N:
        sk = k % S
        last = reach[k + 1] if k + 1 < N else N - 1
        nb = last - k
        for t in range(1, nb + 1):
            slots[t] = (k + t) % S
        a = Wn[sk, sk]
        colmax = 0.0
        for t in range(1, nb + 1):
            colk[t] = Wn[slots[t], sk]
            colmax = max(colmax, abs(colk[t]))
        use2 = False
        if abs(a) < alpha_bk * colmax and k + 1 < N:
            b = Wn[slots[1], sk]
            c = Wn[slots[1], slots[1]]
            det = a * c - b * b
            if abs(det) > 1e-14 * (abs(a) + abs(b) + abs(c)) ** 2:
                use2 = True
        if not use2:
            if not np.isfinite(a):
                return -1, 0, reg
            if a == 0.0:
                a = eps
                reg += 1
            if a < 0:
                neg += 1
            for t in range(1, nb + 1):
                li = colk[t] / a
                if li == 0.0:
                    continue
                si = slots[t]
                for u in range(1, t + 1):
                    Wn[si, slots[u]] -= li * colk[u]
            nxt = k + S
            if nxt < N:
                s = nxt % S
                for j in range(S):
                    Wn[s, j] = 0.0
                Wn[s, s] = diag[nxt] - shift
                for idx in range(ptr[nxt], ptr[nxt + 1]):
                    Wn[s, cols[idx] % S] = vals[idx]
            k += 1
        else:
            sk1 = slots[1]
            b = Wn[sk1, sk]
            c = Wn[sk1, sk1]
            det = a * c - b * b
            if not np.isfinite(det):
                return -1, 0, reg
            if det < 0:
                neg += 1
            elif a + c < 0:
                neg += 2
            for t in range(2, nb + 1):
                colk1[t] = Wn[slots[t], sk1]
            for t in range(2, nb + 1):
                u0 = colk[t]
                v0 = colk1[t]
                l1 = (u0 * c - v0 * b) / det
                l2 = (v0 * a - u0 * b) / det
                if l1 == 0.0 and l2 == 0.0:
                    continue
                si = slots[t]
                for u in range(2, t + 1):
                    Wn[si, slots[u]] -= l1 * colk[u] + l2 * colk1[u]
            for nxt in (k + S, k + S + 1):
                if nxt < N:
                    s = nxt % S
                    for j in range(S):
                        Wn[s, j] = 0.0
                    Wn[s, s] = diag[nxt] - shift
                    for idx in range(ptr[nxt], ptr[nxt + 1]):
                        Wn[s, cols[idx] % S] = vals[idx]
            k += 2
    return neg, zer, reg


@dataclass
class DirectCount:
    count: int
    grid: GridND
    method: str
    flags: list = field(default_factory=list)
    unknowns: int = 0


def _link_phase(a_poly, j, x, h):
    """int_0^h a_j(x + s e_j) ds by 4-point Gauss-Legendre (exact up to degree 7)."""
    xg, wg = np.polynomial.legendre.leggauss(6)
    acc = np.zeros(x.shape[0])
    for t, wt in zip(xg, wg):
        y = x.copy()
        y[:, j] += 0.5 * h * (t + 1)
        acc += wt * a_poly.feval(y)
    return 0.5 * h * acc


def _grid_points(grid):
    axes = [grid.axis(j).points() for j in range(len(grid.m))]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1), axes


def fd_matrix_parts(spec, grid, parity=None):
    """Diagonal and lower band (CSR) of the FD Hamiltonian, realified if complex.

    Natural ordering with the last axis fastest.  ``parity`` (tuple of +1/-1
    per axis, or None) restricts to a reflection sector on the half grid
    x_j > 0; it needs a = 0, V even in every variable and even m_j.
    Returns (diag, ptr, cols, vals, bandwidth, complex_flag).
    """
    n = spec.n
    h = grid.h
    if parity is not None:
        for j in range(n):
            if grid.m[j] % 2:
                raise ValueError("parity sectors need even point counts")
        half_m = tuple(m // 2 for m in grid.m)
        axes = [grid.axis(j).points()[half_m[j]:] for j in range(n)]
        shape = half_m
    else:
        axes = [grid.axis(j).points() for j in range(n)]
        shape = tuple(grid.m)
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=1)
    N = X.shape[0]
    strides = [int(np.prod(shape[j + 1:])) for j in range(n)]
    idx = np.arange(N).reshape(shape)
    diag = np.zeros(N)
    if not spec.V.is_zero():
        diag += spec.V.feval(X)
    # off-diagonal links (k, k + e_j): H[k+e, k] = -exp(-i theta_k) / h^2
    low_rows, low_cols, low_re, low_im = [], [], [], []
    for j in range(n):
        diag += 2.0 / h[j] ** 2
        if parity is not None:
            first = np.take(idx, 0, axis=j).ravel()
            diag[first] -= parity[j] / h[j] ** 2
        sl_from = [slice(None)] * n
        sl_to = [slice(None)] * n
        sl_from[j] = slice(0, shape[j] - 1)
        sl_to[j] = slice(1, shape[j])
        src = idx[tuple(sl_from)].ravel()
        dst = idx[tuple(sl_to)].ravel()
        if spec.a[j].is_zero():
            th = np.zeros(len(src))
        else:
            th = _link_phase(spec.a[j], j, X[src], h[j])
        low_rows.append(dst)
        low_cols.append(src)
        low_re.append(-np.cos(th) / h[j] ** 2)
        low_im.append(np.sin(th) / h[j] ** 2)   # imag part of -exp(-i th)
    rows = np.concatenate(low_rows)
    cols = np.concatenate(low_cols)
    re = np.concatenate(low_re)
    im = np.concatenate(low_im)
    diag, ptr, cols, vals, cplx = _assemble(diag, rows, cols, re, im)
    bw = max(strides)
    return diag, ptr, cols, vals, (2 * bw + 1 if cplx else bw), cplx


def _assemble(diag, rows, cols, re, im):
    """Lower CSR from link lists (rows > cols).  Complex Hermitian matrices are
    realified by interleaving: node k -> (2k, 2k+1), block [[S, -K], [K, S]]
    for the lower entry S + iK."""
    N = len(diag)
    if not np.any(im != 0):
        order = np.lexsort((cols, rows))
        rows, cols, re = rows[order], cols[order], re[order]
        ptr = np.zeros(N + 1, dtype=np.int64)
        np.add.at(ptr, rows + 1, 1)
        return diag, np.cumsum(ptr), cols.astype(np.int64), re, False
    rr = np.concatenate([2 * rows, 2 * rows, 2 * rows + 1, 2 * rows + 1])
    cc = np.concatenate([2 * cols, 2 * cols + 1, 2 * cols, 2 * cols + 1])
    vv = np.concatenate([re, -im, im, re])
    keep = vv != 0
    rr, cc, vv = rr[keep], cc[keep], vv[keep]
    order = np.lexsort((cc, rr))
    rr, cc, vv = rr[order], cc[order], vv[order]
    ptr = np.zeros(2 * N + 1, dtype=np.int64)
    np.add.at(ptr, rr + 1, 1)
    return np.repeat(diag, 2), np.cumsum(ptr), cc.astype(np.int64), vv, True


def envelope_reach(ptr, cols):
    """reach[k] = last row whose first stored column is <= k (at least k)."""
    N = len(ptr) - 1
    first = np.arange(N)
    has = ptr[1:] > ptr[:-1]
    first[has] = cols[ptr[:-1][has]]
    top = np.full(N, -1, dtype=np.int64)
    np.maximum.at(top, first, np.arange(N))
    return np.maximum(np.maximum.accumulate(top), np.arange(N))


def _is_separable(spec):
    if any(not a.is_zero() for a in spec.a):
        return False
    return all(sum(1 for e in alpha if e) <= 1 for alpha in spec.V.monomials())


def _axis_potential(spec, j):
    c = {}
    for alpha, v in spec.V.items():
        if all(e == 0 for i, e in enumerate(alpha) if i != j):
            c[alpha[j]] = float(v)
    deg = max(c) if c else 0
    return np.array([c.get(k, 0.0) for k in range(deg + 1)])


def _axis_eigs(coef, grid1, upper):
    from scipy.linalg import eigvalsh_tridiagonal
    y = grid1.points()
    h = grid1.h
    d = 2 / h ** 2 + np.polynomial.polynomial.polyval(y, coef)
    e = -np.ones(len(y) - 1) / h ** 2
    return eigvalsh_tridiagonal(d, e, select="v", select_range=(-np.inf, upper))


def separable_count(spec, lam, grid):
    """Kronecker-sum count #{(i, j, ..): e_i + f_j + .. < lam} from 1D spectra."""
    n = spec.n
    coefs = [_axis_potential(spec, j) for j in range(n)]
    # shared constant term sits in every axis potential; keep it once
    const = float(spec.V.constant_term())
    for j in range(1, n):
        coefs[j] = coefs[j].copy()
        coefs[j][0] -= const
    e0 = []
    from scipy.linalg import eigvalsh_tridiagonal
    for j in range(n):
        g1 = grid.axis(j)
        y = g1.points()
        d = 2 / g1.h ** 2 + np.polynomial.polynomial.polyval(y, coefs[j])
        e = -np.ones(len(y) - 1) / g1.h ** 2
        e0.append(float(eigvalsh_tridiagonal(d, e, select="i", select_range=(0, 0))[0]))
    eigs = []
    for j in range(n):
        upper = lam - (sum(e0) - e0[j])
        eigs.append(np.sort(_axis_eigs(coefs[j], grid.axis(j), upper)))
    if n == 2:
        return int(np.sum(np.searchsorted(eigs[1], lam - eigs[0], side="left")))
    total = 0
    for e in eigs[0]:
        for f in eigs[1]:
            total += int(np.searchsorted(eigs[2], lam - e - f, side="left"))
    return total


def truncation_box(spec, lam, ctrunc=16.0, directions=2048, pad=1.05):
    """Half-widths of a box containing {x : Psi*(x)^2 <= ctrunc lam}."""
    from .scaling import psi_star
    psi = psi_star(spec)
    n = spec.n
    level = math.sqrt(ctrunc * lam)
    rng = np.random.default_rng(7)
    U = rng.standard_normal((directions, n))
    U = np.concatenate([U, np.eye(n), -np.eye(n)])
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    # radial scan on a geometric grid, then the outermost crossing
    radii = np.geomspace(1e-3, 1e6, 600)
    best = np.zeros(n)
    for chunk in np.array_split(U, max(1, len(U) // 256)):
        P = chunk[:, None, :] * radii[None, :, None]
        vals = psi(P.reshape(-1, n)).reshape(len(chunk), len(radii))
        inside = vals <= level
        for i in range(len(chunk)):
            ins = np.nonzero(inside[i])[0]
            if len(ins) == 0:
                continue
            r = radii[min(ins[-1] + 1, len(radii) - 1)]
            best = np.maximum(best, np.abs(chunk[i]) * r)
    if np.any(best >= 1e6 * 0.99):
        raise DomainTooSmall("Psi* sublevel set looks unbounded")
    return tuple(float(b * pad) for b in best)


def auto_grid(spec, lam, box=None, ctrunc=16.0, even=False):
    L = box if box is not None else truncation_box(spec, lam, ctrunc)
    h = resolution_step_nd(spec, lam, L)
    ms = []
    for Lj in L:
        m = int(math.ceil(2 * Lj / h)) - 1
        if even and m % 2:
            m += 1
        ms.append(max(m, 4))
    return GridND(tuple(L), tuple(ms))


def resolution_step_nd(spec, lam, L, samples=20000):
    """h allowed by h sqrt(lam) <= 1/4, h |grad V| <= max(lam,1)/2 where V <= 4 lam,
    and flux per cell h^2 |b| <= pi/4 where |b| <= 4 lam."""
    h = 0.25 / math.sqrt(max(lam, 1e-12))
    n = spec.n
    rng = np.random.default_rng(3)
    X = (rng.random((samples, n)) * 2 - 1) * np.array(L)
    if not spec.V.is_zero():
        V = spec.V.feval(X)
        grad = np.sqrt(sum(spec.V.partial(j + 1).feval(X) ** 2 for j in range(n)))
        m = V <= 4 * lam
        if m.any() and grad[m].max() > 0:
            h = min(h, 0.5 * max(lam, 1.0) / float(grad[m].max()))
    comps = spec.field_components()
    if comps:
        bmax = np.zeros(samples)
        for _, b in comps:
            bmax = np.maximum(bmax, np.abs(b.feval(X)))
        m = bmax <= 4 * lam
        if m.any() and bmax[m].max() > 0:
            h = min(h, math.sqrt(0.25 * math.pi / float(bmax[m].max())))
    return h


def check_grid(spec, lam, grid, ctrunc=16.0, box_given=False):
    hmax = resolution_step_nd(spec, lam, grid.L)
    if max(grid.h) > hmax * (1 + 1e-9):
        raise GridTooCoarse(f"h = {max(grid.h):.4g} exceeds the resolution limit {hmax:.4g} at lam = {lam}")


@dataclass
class MaskedDomain:
    """Lattice points x = h (idx + 1/2) inside {Psi*^2 <= ctrunc lam}; Dirichlet outside."""
    h: float
    idx: np.ndarray
    ctrunc: float
    fiber: int

    @property
    def size(self):
        return int(self.idx.shape[0])

    def points(self):
        return self.h * (self.idx + 0.5)


def _lattice_runs(lo, hi, h):
    big = 2.0 ** 50
    j0 = np.ceil(np.clip(lo / h - 0.5, -big, big)).astype(np.int64)
    j1 = np.floor(np.clip(hi / h - 0.5, -big, big)).astype(np.int64)
    return j0, j1


def _mask_lattice(problem, level, h, fiber, bounds, max_points=np.inf):
    """Lattice points where every term satisfies |P_i|^p_i <= level.

    Rows run over the outer axes; along the fiber each term gives intervals
    and a point is kept when all fiber-dependent terms cover it."""
    from .volume import SublevelProblem, fiber_intervals
    n = problem.nvars
    outer = [j for j in range(n) if j != fiber]
    ranges = [np.arange(-int(math.ceil(bounds[j] / h)) - 1, int(math.ceil(bounds[j] / h)) + 1) for j in outer]
    mesh = np.meshgrid(*ranges, indexing="ij")
    O = np.stack([m.ravel() for m in mesh], axis=1)
    Z = np.zeros((O.shape[0], n))
    Z[:, outer] = h * (O + 0.5)
    keep = np.ones(O.shape[0], dtype=bool)
    events_r, events_j, events_d = [], [], []
    nf = 0
    for P, p in problem.terms:
        if P.degree_in(fiber + 1) == 0:
            keep &= np.abs(P.feval(Z)) ** p <= level
            continue
        nf += 1
        lo, hi, row = fiber_intervals(SublevelProblem([(P, p)], 0.0, n), fiber, Z, level,
                                      allow_unbounded=True)
        cap = bounds[fiber] if bounds[fiber] is not None else np.inf
        lo, hi = np.maximum(lo, -cap), np.minimum(hi, cap)
        j0, j1 = _lattice_runs(lo, hi, h)
        ok = j1 >= j0
        events_r += [row[ok], row[ok]]
        events_j += [j0[ok], j1[ok] + 1]
        events_d += [np.ones(ok.sum(), dtype=np.int64), -np.ones(ok.sum(), dtype=np.int64)]
    if nf == 0:
        raise DomainTooSmall(f"no term bounds the masked domain along x{fiber + 1}")
    r = np.concatenate(events_r)
    j = np.concatenate(events_j)
    d = np.concatenate(events_d)
    order = np.lexsort((d, j, r))        # closings before openings at equal positions
    r, j, d = r[order], j[order], d[order]
    cov = np.cumsum(d)
    # runs where all nf terms cover [j_e, j_{e+1})
    full = np.nonzero(cov[:-1] == nf)[0]
    full = full[(r[full] == r[full + 1]) & keep[r[full]]]
    a0 = j[full]
    a1 = j[full + 1] - 1
    if len(a0) and (np.abs(a0).max() > 2 ** 40 or np.abs(a1).max() > 2 ** 40):
        raise DomainTooSmall(f"masked domain is unbounded along x{fiber + 1}")
    rows = r[full]
    cnt = np.maximum(a1 - a0 + 1, 0)
    tot = int(cnt.sum())
    if tot > max_points:
        raise GridTooLarge(f"{tot:.2e} points in the masked domain (limit {max_points:.1e})")
    idx = np.empty((tot, n), dtype=np.int64)
    rep = np.repeat(np.arange(len(cnt)), cnt)
    start = np.cumsum(cnt) - cnt
    idx[:, fiber] = a0[rep] + np.arange(tot) - start[rep]
    idx[:, outer] = O[rows[rep]]
    return idx


def _resolution_at(spec, lam, X):
    """Largest h meeting the resolution rules on the sample points X."""
    h = 0.25 / math.sqrt(max(lam, 1e-12))
    n = spec.n
    if not spec.V.is_zero():
        V = spec.V.feval(X)
        grad = np.sqrt(sum(spec.V.partial(j + 1).feval(X) ** 2 for j in range(n)))
        m = V <= 4 * lam
        if m.any() and grad[m].max() > 0:
            h = min(h, 0.5 * max(lam, 1.0) / float(grad[m].max()))
    comps = spec.field_components()
    if comps:
        bmax = np.zeros(X.shape[0])
        for _, b in comps:
            bmax = np.maximum(bmax, np.abs(b.feval(X)))
        m = bmax <= 4 * lam
        if m.any() and bmax[m].max() > 0:
            h = min(h, math.sqrt(0.25 * math.pi / float(bmax[m].max())))
    return h


def masked_domain(spec, lam, ctrunc=8.0, h=None, max_points=2.5e7):
    """Lattice points where each term of Psi* is at most sqrt(ctrunc lam), found
    exactly line by line along the longest axis (thin arms are not missed the
    way ray scans miss them).  Using every term separately rather than their
    sum keeps the mask close to the region the states actually occupy."""
    from .scaling import psi_star
    from .volume import axis_bound
    problem = psi_star(spec).problem()
    n = spec.n
    level = math.sqrt(ctrunc * lam)
    T = level
    star = psi_star(spec)
    if any(abs(float(P.constant_term())) ** float(p) > level for _, P, p in star.terms if P.is_constant()):
        return MaskedDomain(h or 0.25 / math.sqrt(lam), np.zeros((0, n), dtype=np.int64), ctrunc, 0)
    bounds = []
    for v in range(n):
        alone = [(P, p) for P, p in problem.terms if {j - 1 for j in P.variables()} == {v}]
        bounds.append(axis_bound(alone, v, T, n) if alone else None)
    open_axes = [v for v in range(n) if bounds[v] is None]
    if len(open_axes) > 1:
        raise DomainTooSmall(f"no a priori bound in axes {open_axes} of the Psi* sublevel set")
    fiber = open_axes[0] if open_axes else int(np.argmax(bounds))
    fixed = h is not None
    h = h if fixed else 0.25 / math.sqrt(lam)
    for _ in range(8):
        outer_pts = np.prod([2 * bounds[j] / h + 3 for j in range(n) if j != fiber])
        if outer_pts > max_points:
            raise GridTooLarge(f"{outer_pts:.2e} lattice lines for the masked domain")
        idx = _mask_lattice(problem, level, h, fiber, bounds, max_points)
        if fixed or idx.shape[0] == 0:
            break
        sub = idx[np.random.default_rng(3).choice(len(idx), min(len(idx), 50000), replace=False)]
        hmax = _resolution_at(spec, lam, h * (sub + 0.5))
        if h <= hmax * (1 + 1e-9):
            break
        h = 0.95 * hmax
    return MaskedDomain(float(h), idx, float(ctrunc), fiber)


def reflection_axes(spec):
    """Axes j whose reflection x_j -> -x_j maps the discretized operator to itself
    in the given gauge: V even, a_j odd and the other a_i even in x_j."""
    out = []
    for j in range(spec.n):
        def parity_ok(P, want):
            return all((al[j] % 2 == 0) == (want == 1) for al in P.monomials())
        if not parity_ok(spec.V, 1):
            continue
        if all(parity_ok(spec.a[i], -1 if i == j else 1) for i in range(spec.n)):
            out.append(j)
    return out


def masked_hamiltonian(spec, dom: MaskedDomain, parity=None):
    """Peierls FD Hamiltonian on the masked lattice as (diag, rows, cols, vals),
    the strictly lower triangle with complex values.

    ``parity`` maps axis -> +1/-1 to restrict to a reflection sector: only
    points with idx_j >= 0 are kept (the mirror of idx_j = 0 is idx_j = -1)
    and the link across the mirror folds onto the diagonal.
    """
    n = spec.n
    h = dom.h
    idx = dom.idx
    parity = dict(parity or {})
    if parity:
        keep = np.ones(len(idx), dtype=bool)
        for j in parity:
            keep &= idx[:, j] >= 0
        idx = idx[keep]
    N = idx.shape[0]
    if N == 0:
        e = np.zeros(0, dtype=np.int64)
        return np.zeros(0), e, e, np.zeros(0, complex)
    lo = idx.min(axis=0)
    span = idx.max(axis=0) - lo + 3
    mult = np.array([int(np.prod(span[j + 1:])) for j in range(n)], dtype=np.int64)
    keys = (idx - lo + 1) @ mult
    srt = np.argsort(keys)
    skeys = keys[srt]
    X = h * (idx + 0.5)
    diag = np.full(N, 2.0 * n / h ** 2)
    if not spec.V.is_zero():
        diag += spec.V.feval(X)
    for j, sgn in parity.items():
        # the crossing link has zero phase because a_j is odd in x_j
        diag[idx[:, j] == 0] -= sgn / h ** 2
    src_l, dst_l, th_l = [], [], []
    for j in range(n):
        target = keys + mult[j]
        pos = np.minimum(np.searchsorted(skeys, target), N - 1)
        hit = skeys[pos] == target
        src = np.nonzero(hit)[0]
        src_l.append(src)
        dst_l.append(srt[pos[hit]])
        th_l.append(np.zeros(len(src)) if spec.a[j].is_zero() else _link_phase(spec.a[j], j, X[src], h))
    src = np.concatenate(src_l)
    dst = np.concatenate(dst_l)
    # H[dst, src] = -exp(-i th) / h^2
    val = -np.exp(-1j * np.concatenate(th_l)) / h ** 2
    swap = dst < src
    rows = np.where(swap, src, dst)
    cols = np.where(swap, dst, src)
    val = np.where(swap, np.conj(val), val)
    return diag, rows, cols, val


def masked_fd_parts(spec, dom: MaskedDomain, parity=None):
    """Realified lower CSR in reverse Cuthill-McKee order, for the envelope solver.

    Returns (diag, ptr, cols, vals, reach, complex_flag)."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import reverse_cuthill_mckee
    diag, rows, cols, val = masked_hamiltonian(spec, dom, parity)
    N = len(diag)
    if N > 1:
        G = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(N, N)).tocsr()
        perm = reverse_cuthill_mckee(G + G.T, symmetric_mode=True)
        new = np.empty(N, dtype=np.int64)
        new[perm] = np.arange(N)
        diag = diag[perm]
        r, c = new[rows], new[cols]
        swap = r < c
        rows, cols = np.where(swap, c, r), np.where(swap, r, c)
        val = np.where(swap, np.conj(val), val)
    diag, ptr, cols, vals, cplx = _assemble(diag, rows, cols, val.real, val.imag)
    return diag, ptr, cols, vals, envelope_reach(ptr, cols), cplx


def _sparse_inertia(diag, rows, cols, vals, lam, eps=0.0):
    """Negative inertia of H - lam via a sparse LDL^T with fill-reducing (AMD)
    ordering and no pivoting (CHOLMOD through cvxopt).  Returns (neg, bad) where
    bad counts zero or non-finite pivots."""
    from cvxopt import cholmod, matrix, spmatrix
    N = len(diag)
    if N == 0:
        return 0, 0
    cplx = bool(np.any(vals.imag != 0))
    d = diag - lam + eps
    V = np.concatenate([d.astype(complex) if cplx else d, vals if cplx else vals.real])
    I = np.concatenate([np.arange(N), rows]).astype(np.int64)
    J = np.concatenate([np.arange(N), cols]).astype(np.int64)
    A = spmatrix(matrix(V), matrix(I), matrix(J), (N, N))
    old = cholmod.options.get("supernodal")
    cholmod.options["supernodal"] = 0      # simplicial LDL^T; supernodal is LL^T only
    try:
        F = cholmod.symbolic(A)
        cholmod.numeric(A, F)
        B = matrix(complex(1.0) if cplx else 1.0, (N, 1))
        cholmod.solve(F, B, sys=6)         # B <- D^{-1} B
    except ArithmeticError:
        return -1, N
    finally:
        if old is None:
            cholmod.options.pop("supernodal", None)
        else:
            cholmod.options["supernodal"] = old
    Dinv = np.asarray(B).ravel().real
    bad = int(np.sum(~np.isfinite(Dinv)))
    return int(np.sum(Dinv < 0)), bad


def _inertia(diag, ptr, cols, vals, reach, lam, flags):
    w = int(np.max(reach - np.arange(len(reach)))) + 1 if len(reach) else 1
    scale = float(np.max(np.abs(diag))) + (float(np.max(np.abs(vals))) if len(vals) else 0.0)
    neg, _, reg = _band_ldlt_inertia(diag, ptr, cols, vals, w, float(lam), 0.0, reach)
    if neg < 0:
        neg, _, reg = _band_ldlt_inertia(diag, ptr, cols, vals, w, float(lam), 1e-12 * scale, reach)
        flags.append("regularized")
        if neg < 0:
            raise FactorizationBreakdown("non-finite pivot in band LDL^T")
    if reg:
        flags.append(f"zero_pivots={reg}")
    return neg


def envelope_work(reach):
    d = (reach - np.arange(len(reach))).astype(float)
    return float(np.sum(d * d)), int(d.max()) if len(d) else 0


def count_nd_direct(spec, lam, grid: GridND | None = None, *, ctrunc=16.0, box=None,
                    method="auto", parity=False, sectors=None, max_work=2e11, max_window_bytes=1.5e9,
                    check=True, info=False, domain="box"):
    """Eigenvalues < lam of the Peierls finite-difference discretization.

    ``domain="mask"`` counts on the lattice points of {Psi*^2 <= ctrunc lam}
    instead of a box (see ``count_masked``); grid, box and parity are ignored.

    ``method``: "auto" (separable fast path when a = 0 and V is a sum of
    one-variable terms, else band LDL^T), "band", "sparse" (fill-reducing
    LDL^T, much cheaper on big grids) or "separable".
    ``parity=True`` splits a = 0, V even in every variable into reflection
    sectors (exact block diagonalization); ``sectors`` restricts the count to
    a subset of them, given as tuples of +1/-1 per axis.
    """
    if domain == "mask":
        return count_masked(spec, lam, ctrunc=ctrunc, max_work=max_work,
                            max_window_bytes=max_window_bytes, info=info)
    n = spec.n
    if grid is None:
        grid = auto_grid(spec, lam, box, ctrunc, even=parity or sectors is not None)
    elif check:
        check_grid(spec, lam, grid, ctrunc)
    flags = []
    use_sep = method == "separable" or (method == "auto" and _is_separable(spec))
    if use_sep:
        c = separable_count(spec, lam, grid)
        res = DirectCount(c, grid, "separable", flags, grid.size)
        return res if info else c
    chosen = sectors
    sectors = [None]
    if parity or chosen is not None:
        if any(not a.is_zero() for a in spec.a) or any(any(e % 2 for e in al) for al in spec.V.monomials()):
            raise ValueError("parity sectors need a = 0 and V even in every variable")
        sectors = [tuple(1 if (s >> j) & 1 else -1 for j in range(n)) for s in range(2 ** n)]
        if chosen is not None:
            sectors = [tuple(c) for c in chosen]
    total = 0
    unknowns = 0
    for sec in sectors:
        shape = [m // 2 for m in grid.m] if sec is not None else list(grid.m)
        N = int(np.prod(shape))
        bw = int(np.prod(shape[1:]))
        realified = any(not a.is_zero() for a in spec.a)
        Nr, bwr = (2 * N, 2 * bw + 1) if realified else (N, bw)
        work = Nr * float(bwr) ** 2
        if method == "sparse":
            diag, ptr, cols, vals, bwx, cplx = fd_matrix_parts(spec, grid, sec)
            rows = np.repeat(np.arange(len(diag)), np.diff(ptr))
            neg, bad = _sparse_inertia(diag, rows, cols, vals.astype(float), lam)
            if bad or neg < 0:
                raise FactorizationBreakdown("zero pivot in sparse LDL^T")
            total += neg // 2 if cplx else neg
            unknowns += N
            continue
        if work > max_work or (bwr + 2) ** 2 * 8 > max_window_bytes:
            raise GridTooLarge(f"band LDL^T needs ~{work:.2e} flops and a {(bwr + 2) ** 2 * 8 / 1e9:.2f} GB "
                               f"window for grid {grid.m}; budget {max_work:.1e}")
        diag, ptr, cols, vals, bwx, cplx = fd_matrix_parts(spec, grid, sec)
        reach = envelope_reach(ptr, cols)
        neg = _inertia(diag, ptr, cols, vals, reach, lam, flags)
        if cplx:
            if neg % 2:
                flags.append("odd_realified_inertia")
            neg = neg // 2
        total += neg
        unknowns += N
    res = DirectCount(int(total), grid, "sparse-ldlt" if method == "sparse" else "band-ldlt", flags, unknowns)
    return res if info else int(total)


def _symmetrize(dom, axes):
    """Drop points whose mirror images are missing (roundoff at interval ends)."""
    if not axes or dom.size == 0:
        return dom
    idx = dom.idx
    lo = idx.min() - 1
    span = idx.max() - lo + 2
    mult = span ** np.arange(idx.shape[1] - 1, -1, -1)
    keys = (idx - lo) @ mult
    keep = np.ones(len(idx), dtype=bool)
    for j in axes:
        m = idx.copy()
        m[:, j] = -1 - m[:, j]
        keep &= np.isin((m - lo) @ mult, keys)
    return MaskedDomain(dom.h, idx[keep], dom.ctrunc, dom.fiber)


def _sector_list(spec, use_symmetry):
    axes = reflection_axes(spec) if use_symmetry else []
    out = []
    for bits in range(2 ** len(axes)):
        out.append({j: (1 if (bits >> i) & 1 else -1) for i, j in enumerate(axes)})
    return out


def _solve_count(spec, dom, lam, sec, solver, max_work, max_window_bytes, flags, max_unknowns=6e6):
    if solver == "sparse":
        size = dom.size / 2 ** len(sec)
        if size > max_unknowns:
            raise GridTooLarge(f"~{size:.2e} unknowns in one sector; the sparse factor would not fit "
                               f"(limit {max_unknowns:.1e})")
        diag, rows, cols, vals = masked_hamiltonian(spec, dom, sec)
        neg, bad = _sparse_inertia(diag, rows, cols, vals, lam)
        if bad or neg < 0:
            scale = float(np.max(np.abs(diag))) + 4.0 / dom.h ** 2
            neg, bad = _sparse_inertia(diag, rows, cols, vals, lam, 1e-12 * scale)
            flags.append("regularized")
            if bad or neg < 0:
                raise FactorizationBreakdown("zero pivot in sparse LDL^T after regularization")
        return neg
    diag, ptr, cols, vals, reach, cplx = masked_fd_parts(spec, dom, sec)
    if len(diag) == 0:
        return 0
    work, w = envelope_work(reach)
    if work > max_work or (w + 3) ** 2 * 8 > max_window_bytes:
        raise GridTooLarge(f"envelope LDL^T needs ~{work:.2e} flops and a {(w + 3) ** 2 * 8 / 1e9:.2f} GB "
                           f"window for {len(diag)} unknowns; budget {max_work:.1e}")
    neg = _inertia(diag, ptr, cols, vals, reach, lam, flags)
    if cplx:
        if neg % 2:
            flags.append("odd_realified_inertia")
        neg //= 2
    return neg


def truncation_shell_count(spec, lam, dom: MaskedDomain, inner=0.5, solver="sparse", symmetry=True):
    """Eigenvalues < 2 lam of the operator on the outer shell of the mask
    (points of dom outside the mask at ctrunc*inner), Dirichlet on both sides."""
    core = masked_domain(spec, lam, dom.ctrunc * inner, h=dom.h)
    lo = min(dom.idx.min(), core.idx.min() if core.size else 0) - 1
    span = max(dom.idx.max(), core.idx.max() if core.size else 0) - lo + 2
    mult = span ** np.arange(spec.n - 1, -1, -1)
    k_all = (dom.idx - lo) @ mult
    k_core = (core.idx - lo) @ mult if core.size else np.zeros(0, dtype=np.int64)
    shell = MaskedDomain(dom.h, dom.idx[~np.isin(k_all, k_core)], dom.ctrunc, dom.fiber)
    flags = []
    total = 0
    for sec in _sector_list(spec, symmetry):
        total += _solve_count(spec, shell, 2 * lam, sec, solver, 1e12, 4e9, flags)
    return total


def count_masked(spec, lam, ctrunc=8.0, h=None, max_work=2e11, max_window_bytes=1.5e9, info=False,
                 dom=None, solver="sparse", symmetry=True, check_truncation=False, max_unknowns=6e6):
    """Eigenvalues < lam on the masked lattice (Dirichlet outside the mask).

    Shrinking the domain only raises Dirichlet eigenvalues, so the count is
    nondecreasing in ctrunc; compare two values of ctrunc to check truncation.
    ``solver``: "sparse" (fill-reducing LDL^T) or "envelope" (the band solver
    with 2x2 pivots run on the RCM envelope).  ``symmetry`` splits exact
    reflection symmetries of the gauge into independent sectors.
    """
    import warnings
    dom = dom if dom is not None else masked_domain(spec, lam, ctrunc, h)
    if symmetry:
        dom = _symmetrize(dom, reflection_axes(spec))
    flags = []
    total = 0
    for sec in _sector_list(spec, symmetry):
        total += _solve_count(spec, dom, lam, sec, solver, max_work, max_window_bytes, flags, max_unknowns)
    if check_truncation and dom.size:
        shell = truncation_shell_count(spec, lam, dom, solver=solver, symmetry=symmetry)
        if shell:
            flags.append(f"truncation_unsound={shell}")
            warnings.warn(TruncationUnsound(f"{shell} shell states below 2*lam = {2 * lam}"))
    method = "masked-" + ("sparse-ldlt" if solver == "sparse" else "envelope-ldlt")
    res = DirectCount(int(total), dom, method, flags, dom.size)
    return res if info else int(total)


def dense_count(spec, lam, grid, parity=None):
    """Oracle: dense eigensolve of the same FD matrix (small grids only)."""
    diag, ptr, cols, vals, bw, cplx = fd_matrix_parts(spec, grid, parity)
    N = len(diag)
    A = np.diag(diag)
    for r in range(N):
        for idx in range(ptr[r], ptr[r + 1]):
            A[r, cols[idx]] = vals[idx]
            A[cols[idx], r] = vals[idx]
    ev = np.linalg.eigvalsh(A)
    c = int(np.sum(ev < lam))
    return c // 2 if cplx else c
