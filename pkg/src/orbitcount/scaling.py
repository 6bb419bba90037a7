"""Dilated orbit measures, growth exponents (alpha, beta), the limit measure
mu0 for the supported families, and the degeneration classifier built on
Phi*, Psi*.

Convention: mu_lam(A) = mu(Omega cap lam A), so the growth function of a
chart phi is G(lam) = meas{z : sum_j phi_j(z)^2 <= lam^2} and
mu0 = lim lam^-alpha (log lam)^-beta mu_lam.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import qlinalg
from .curves import CountingCurve, FitResult, fit
from .errors import (InconclusiveClassification, NotQuasiHomogeneous, UnsupportedFamily,
                     ValidationFailure)
from .poly import MultiPoly, WeightVector, quasi_weights
from .volume import SublevelProblem, SublevelVolume


# --- weights -----------------------------------------------------------------------

def dilation_weights(spec) -> WeightVector:
    """Weights for the quasi-dilation of the operator's generators.

    Uses the exact quasi-homogeneous weight when one exists; otherwise the
    weight of the top-degree parts, provided every other monomial has
    quasi-degree <= 1.
    """
    gens = spec.generators()
    try:
        return quasi_weights(gens)
    except NotQuasiHomogeneous:
        tops = []
        for P in gens:
            d = P.degree()
            tops.append(MultiPoly(P.nvars, {a: c for a, c in P.items() if sum(a) == d}))
        w = quasi_weights(tops)
        for P in gens:
            if any(w.degree_of(a) > 1 for a in P.monomials()):
                raise NotQuasiHomogeneous("lower-order terms dominate the top-degree weight")
        return w


# --- Phi*, Psi* --------------------------------------------------------------------

@dataclass(frozen=True)
class StarFunction:
    """sum_i |P_i(x)|^p_i, with exact term list kept."""
    name: str
    nvars: int
    terms: tuple          # ((label, MultiPoly, Fraction exponent), ...)

    def __call__(self, X):
        X = np.asarray(X, float)
        out = np.zeros(X.shape[:-1])
        for _, P, p in self.terms:
            out = out + np.abs(P.feval(X)) ** float(p)
        return out

    def constant(self):
        return sum(abs(float(P.constant_term())) ** float(p) for _, P, p in self.terms if P.is_constant())

    def problem(self):
        return SublevelProblem.from_terms([(P, float(p)) for _, P, p in self.terms], self.nvars)

    def describe(self):
        return " + ".join(f"|{P}|^({p})" for _, P, p in self.terms)


def _derivative_terms(P, label, exponent_rule):
    out = []
    for alpha, D in sorted(P.all_derivatives().items(), key=lambda kv: (sum(kv[0]), kv[0])):
        if D.is_zero():
            continue
        out.append((f"d{alpha}{label}", D, exponent_rule(sum(alpha))))
    return out


def _star(spec, rule, name):
    terms = []
    if not spec.V.is_zero():
        terms += _derivative_terms(spec.V, "V", rule)
    for (j, k), b in spec.field_components():
        terms += _derivative_terms(b, f"b{j}{k}", rule)
    return StarFunction(name, spec.n, tuple(terms))


def phi_star(spec) -> StarFunction:
    return _star(spec, lambda m: Fraction(1, 2), "Phi*")


def psi_star(spec) -> StarFunction:
    return _star(spec, lambda m: Fraction(1, m + 2), "Psi*")


# --- growth curves -----------------------------------------------------------------

def mc_growth(coords, lambdas, samples=20000, seed=0, blocks=16):
    """meas{z : sum_j coords_j(z)^2 <= lam^2} for each lam (conditional Monte Carlo)."""
    coords = [c for c in coords]
    nv = coords[0].nvars
    est = SublevelVolume(SublevelProblem.from_terms([(c, 2.0) for c in coords], nv))
    curve = CountingCurve(metadata={"kind": "growth", "samples": samples, "seed": seed,
                                    "coords": [str(c) for c in coords]})
    for lam in lambdas:
        v, e = est.estimate(float(lam) ** 2, samples=samples, seed=seed, blocks=blocks)
        curve.add(lam, v, "mc", e)
    return curve


def sublevel_curve(star: StarFunction, lambdas, samples=20000, seed=0, blocks=16):
    est = SublevelVolume(star.problem())
    curve = CountingCurve(metadata={"kind": star.name, "samples": samples, "seed": seed})
    for lam in lambdas:
        v, e = est.estimate(float(lam), samples=samples, seed=seed, blocks=blocks)
        curve.add(lam, v, "mc", e)
    return curve


# --- limit measures ----------------------------------------------------------------

@dataclass
class LimitMeasure:
    case: str                     # "A" quasi-dilation, "B" triangular, "C" monomial
    alpha: Fraction
    beta: int
    survivors: tuple              # psi coordinate per basis element of g (zero on the ideal)
    projection: tuple             # unscaled chart coordinate per basis element of g
    nparams: int
    flat_density: float           # mu0 = flat_density * psi_*(density * Lebesgue)
    density_text: str = "1"
    density: Callable = None
    annihilated_ideal: tuple = ()
    spec: object = None
    weights: WeightVector = None
    monomial: tuple = None
    gbar: object = None
    keep: tuple = ()
    center_index: int = None
    substitution: tuple = ()
    validation: dict = field(default_factory=dict)

    @property
    def field(self):
        return self.spec.B

    @property
    def potential(self):
        return self.spec.V

    @property
    def survivors_bar(self):
        return tuple(self.survivors[i] for i in self.keep)

    @property
    def projection_bar(self):
        return tuple(self.projection[i] for i in self.keep)

    def to_json(self):
        return json.dumps({"case": self.case, "alpha": str(self.alpha), "beta": self.beta,
                           "survivors": [str(p) for p in self.survivors],
                           "density": self.density_text, "flat_density": self.flat_density,
                           "ideal_dim": len(self.annihilated_ideal)}, indent=1, sort_keys=True)


def _finish(mu, chart):
    g = chart.g
    n_el = g.dim
    # ideal = kernel of X -> psi(X)
    monos = sorted({m for p in mu.survivors for m in p.monomials()})
    rows = [[mu.survivors[i].coefficient(m) for i in range(n_el)] for m in monos]
    ideal = qlinalg.nullspace(rows, n_el) if rows else [list(g.e(i)) for i in range(n_el)]
    ideal = g.span_basis(ideal)
    if ideal and not g.is_ideal(ideal):
        raise UnsupportedFamily("annihilated subspace is not an ideal")
    mu.annihilated_ideal = tuple(tuple(v) for v in ideal)
    if ideal:
        gbar, _ = g.quotient(ideal)
        mu.keep = gbar.parent_indices
    else:
        gbar = g
        mu.keep = tuple(range(n_el))
    mu.gbar = gbar
    return mu


def _monomial_case(chart, spec):
    if spec.n != 2 or not spec.V.is_zero():
        return None
    comps = spec.field_components()
    if len(comps) != 1:
        return None
    b = comps[0][1]
    if len(b.terms) != 1:
        return None
    (k, l), _ = next(iter(b.items()))
    if k < 1 or l < 1:
        return None
    if k < l:
        raise UnsupportedFamily("monomial field with k < l: relabel x1 <-> x2 first")
    g = chart.g
    if chart.n_prime != 2:
        return None
    survivors = []
    for i in range(g.dim):
        p = chart.coords[i]
        if i < g.n:
            survivors.append(p)
            continue
        lm = g.poly_of[i].leading_monomial()
        keep = (lm[1] == l) if k > l else (lm == (k, l))
        survivors.append(p if keep else MultiPoly.zero(p.nvars))
    if k > l:
        mu = LimitMeasure("C", Fraction(2) + Fraction(1, l), 0, tuple(survivors), chart.coords, 4,
                          (2 * math.pi) ** -2, "1", None, spec=spec, monomial=(k, l))
    else:
        dens = 2.0 / (k * k)

        def density(y, k=k):
            return dens * np.abs(y) ** ((1.0 - k) / k)
        mu = LimitMeasure("C", Fraction(2) + Fraction(1, k), 1, tuple(survivors), chart.coords, 4,
                          (2 * math.pi) ** -2, f"(2/{k * k})|y|^({1 - k}/{k}) deta dy", density,
                          spec=spec, monomial=(k, l))
    mu = _finish(mu, chart)
    if k == l:
        top = next(i for i in range(g.n, g.dim) if g.poly_of[i].leading_monomial() == (k, l))
        mu.center_index = mu.keep.index(top)
    return mu


def _quasi_case(chart, spec, w):
    g = chart.g
    m = chart.n_prime
    if m != spec.n or w is None:
        return None, "chart has fewer coexponential directions than variables"
    deg = [Fraction(1)] * m + list(w.gamma)
    survivors = []
    for p in chart.coords:
        top = {}
        for a, c in p.items():
            d = sum((Fraction(e) * dg for e, dg in zip(a, deg)), Fraction(0))
            if d > 1:
                return None, f"coordinate {p} has quasi-degree above 1"
            if d == 1:
                top[a] = c
        survivors.append(MultiPoly(p.nvars, top))
    # the survivors' sublevel set must have finite measure: common zero set {0}
    xs = [p for p in survivors if any(sum(a[:m]) == 0 and any(a[m:]) for a in p.monomials())]
    if not _only_zero(xs, m, w):
        return None, "surviving coordinates vanish on a nonzero set"
    alpha = m + w.total
    mu = LimitMeasure("A", alpha, 0, tuple(survivors), chart.coords, 2 * m, (2 * math.pi) ** -m,
                      spec=spec, weights=w)
    return _finish(mu, chart), ""


def _only_zero(polys, m, w, samples=20000, seed=12345):
    if not polys:
        return False
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((samples, m))
    inv = np.array([1.0 / float(g) for g in w.gamma])
    s = np.sum(np.abs(U) ** inv, axis=1)
    X = U / (s[:, None] ** np.array([float(g) for g in w.gamma]))
    Z = np.concatenate([np.zeros((samples, m)), X], axis=1)
    vals = sum(p.feval(Z) ** 2 for p in polys)
    best = np.argsort(vals)[:8]
    from scipy.optimize import minimize

    def f(x):
        x = np.asarray(x)
        s = np.sum(np.abs(x) ** inv)
        y = x / (s ** np.array([float(g) for g in w.gamma]))
        z = np.concatenate([np.zeros(m), y])
        return float(sum(p.feval(z) ** 2 for p in polys))
    low = min(f(minimize(f, X[i], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14}).x)
              for i in best)
    return low > 1e-8 * max(float(np.max(vals)), 1e-300)


def _triangular_case(chart, spec):
    g = chart.g
    m = chart.n_prime
    nv = 2 * m
    xvars = list(range(m + 1, nv + 1))
    cand = []
    for i in range(g.n, g.dim):
        p = chart.coords[i]
        if p.is_constant():
            continue
        if any(any(a[:m]) for a in p.monomials()):
            return None, "coordinate mixes xi and x"
        cand.append(i)
    chosen, used, consts = [], [], []
    remaining = list(cand)
    while len(chosen) < m:
        pick = None
        for i in remaining:
            p = chart.coords[i]
            for v in xvars:
                if v in used or p.degree_in(v) != 1:
                    continue
                parts = p.coeffs_in(v)
                lin = parts[1]
                rest = parts.get(0, MultiPoly.zero(nv))
                if lin.is_constant() and set(rest.variables()) <= set(used):
                    pick = (i, v, lin.constant_term())
                    break
            if pick:
                break
        if pick is None:
            return None, "no triangular substitution"
        i, v, c = pick
        chosen.append(i)
        used.append(v)
        consts.append(c)
        remaining.remove(i)
    if remaining:
        return None, "extra non-constant coordinates"
    jac = 1.0
    for c in consts:
        jac *= abs(float(c))
    survivors = []
    for i in range(g.dim):
        if i < g.n:
            survivors.append(chart.coords[i])
        elif i in chosen:
            survivors.append(MultiPoly.var(m + 1 + chosen.index(i), nv))
        else:
            survivors.append(MultiPoly.zero(nv))
    mu = LimitMeasure("B", Fraction(2 * m), 0, tuple(survivors), chart.coords, nv,
                      (2 * math.pi) ** -m / jac, spec=spec,
                      substitution=tuple((i, v, str(c)) for i, v, c in zip(chosen, used, consts)))
    return _finish(mu, chart), ""


def exact_limit(chart, weights=None, validate=True, lambdas=None, samples=4000, seed=0):
    """Limit measure via the monomial, quasi-dilation or triangular pattern."""
    spec = getattr(chart.g, "spec", None)
    if spec is None:
        raise UnsupportedFamily("chart does not come from a Schrodinger spec")
    reasons = []
    mu = _monomial_case(chart, spec)
    if mu is None:
        if weights is None:
            try:
                weights = dilation_weights(spec)
            except NotQuasiHomogeneous as e:
                reasons.append(f"A: {e}")
        if weights is not None:
            mu, why = _quasi_case(chart, spec, weights)
            if why:
                reasons.append(f"A: {why}")
        if mu is None:
            mu, why = _triangular_case(chart, spec)
            if why:
                reasons.append(f"B: {why}")
    if mu is None:
        raise UnsupportedFamily("; ".join(reasons) or "no pattern applies")
    if validate:
        lambdas = lambdas or [10.0 ** (3 + 0.5 * i) for i in range(7)]
        curve = mc_growth(chart.coords, lambdas, samples=samples, seed=seed)
        ft = fit(curve)
        mu.validation = {"a": ft.a, "b": ft.b, "C": ft.C}
        if abs(ft.a - float(mu.alpha)) > 0.1 or ft.b != mu.beta:
            raise ValidationFailure(
                f"growth fit (a={ft.a:.3f}, b={ft.b}) disagrees with (alpha={mu.alpha}, beta={mu.beta})")
    return mu


# --- classification ----------------------------------------------------------------

@dataclass
class DegenerationReport:
    G1_curve: CountingCurve
    G2_curve: CountingCurve
    fits: tuple
    classification: str
    kappa: float
    kappa_ci: tuple
    slope: float
    slope_se: float
    ratio: np.ndarray

    def to_json(self):
        return json.dumps({"classification": self.classification, "kappa": self.kappa,
                           "kappa_ci": list(self.kappa_ci), "slope": self.slope, "slope_se": self.slope_se,
                           "fits": [json.loads(f.to_json()) for f in self.fits]}, indent=1, sort_keys=True)


SLOPE_THRESHOLD = 0.05


POWER_RATE_MIN = 0.2


def _linear_limit(X, ratio):
    coef, *_ = np.linalg.lstsq(X, ratio, rcond=None)
    resid = ratio - X @ coef
    dof = max(len(ratio) - 2, 1)
    cov = (resid @ resid / dof) * np.linalg.inv(X.T @ X)
    return float(coef[0]), float(math.sqrt(max(cov[0, 0], 0.0))), float(resid @ resid)


def _kappa_extrapolate(lam, ratio):
    """Limit of the ratio: k + c / log(lam), or k + c lam^-q when that fits better
    with a real rate (q >= POWER_RATE_MIN); a tiny q only mimics the log model."""
    one = np.ones_like(lam)
    k, se, rss = _linear_limit(np.column_stack([one, 1.0 / np.log(lam)]), ratio)
    best = None
    for q in np.linspace(0.02, 1.5, 149):
        fit_q = _linear_limit(np.column_stack([one, lam ** -q]), ratio)
        if best is None or fit_q[2] < best[1][2]:
            best = (q, fit_q)
    q, (kp, sep, rssp) = best
    if q >= POWER_RATE_MIN and rssp < rss:
        return kp, sep
    return k, se


def classify(spec, lambdas, samples=20000, seed=0, min_decades=1.5):
    g1 = sublevel_curve(phi_star(spec), lambdas, samples, seed)
    g2 = sublevel_curve(psi_star(spec), lambdas, samples, seed + 1)
    lam = g1.lambdas
    r = g2.values / g1.values
    rerr = r * np.sqrt((g1.errors / g1.values) ** 2 + (g2.errors / g2.values) ** 2)
    X = np.column_stack([np.ones_like(lam), np.log(lam)])
    y = np.log(r)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(len(lam) - 2, 1)
    s2 = max(resid @ resid / dof, float(np.mean((rerr / r) ** 2)))
    cov = s2 * np.linalg.inv(X.T @ X)
    slope, se = float(coef[1]), float(math.sqrt(cov[1, 1]))
    fits = (fit(g1, min_decades=min_decades), fit(g2, min_decades=min_decades))
    z = 1.96
    if slope - z * se > SLOPE_THRESHOLD:
        cls, kappa, ci = "Strong", 1.0, (1.0, 1.0)
    elif slope + z * se < SLOPE_THRESHOLD:
        k, kse = _kappa_extrapolate(lam, r)
        cls, kappa, ci = "WeakIntermediate", k, (k - z * kse, k + z * kse)
    else:
        k, kse = _kappa_extrapolate(lam, r)
        rep = DegenerationReport(g1, g2, fits, "Inconclusive", k, (k - z * kse, k + z * kse), slope, se, r)
        raise InconclusiveClassification(
            f"log-ratio slope {slope:.4f} +- {se:.4f} straddles {SLOPE_THRESHOLD}", rep)
    return DegenerationReport(g1, g2, fits, cls, kappa, ci, slope, se, r)
