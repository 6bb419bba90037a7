"""Sampled curves (lambda, value) and power-log fits C * lam^a * (log lam)^b."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSpan


@dataclass
class CurvePoint:
    lam: float
    value: float
    method: str = ""
    error: float = 0.0
    flags: str = ""


@dataclass
class CountingCurve:
    points: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, lam, value, method="", error=0.0, flags=""):
        self.points.append(CurvePoint(float(lam), float(value), method, float(error), flags))

    @property
    def lambdas(self):
        return np.array([p.lam for p in self.points])

    @property
    def values(self):
        return np.array([p.value for p in self.points])

    @property
    def errors(self):
        return np.array([p.error for p in self.points])

    def __len__(self):
        return len(self.points)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "value", "stderr", "method", "flags"])
        for p in self.points:
            w.writerow([repr(p.lam), repr(p.value), repr(p.error), p.method, p.flags])
        return buf.getvalue()


@dataclass(frozen=True)
class FitResult:
    C: float
    a: float
    b: int
    covariance: tuple      # 2x2 over (log C, a)
    bic: float

    @property
    def a_stderr(self):
        return math.sqrt(max(self.covariance[1][1], 0.0))

    def predict(self, lam):
        lam = np.asarray(lam, float)
        return self.C * lam ** self.a * np.log(lam) ** self.b

    def to_json(self):
        return json.dumps({"C": self.C, "a": self.a, "b": self.b,
                           "covariance": [list(r) for r in self.covariance]}, sort_keys=True)


def _ls(lam, y, b):
    X = np.column_stack([np.ones_like(lam), np.log(lam)])
    target = y - b * np.log(np.log(lam))
    coef, *_ = np.linalg.lstsq(X, target, rcond=None)
    resid = target - X @ coef
    m = len(lam)
    rss = float(resid @ resid)
    dof = max(m - 2, 1)
    s2 = rss / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    # floor the rss so an exact model does not produce -inf
    bic = m * math.log(max(rss / m, 1e-300)) + 2 * math.log(m)
    return coef, cov, bic


def fit(curve, force_b=None, min_points=6, min_decades=1.5):
    """Least squares on log N = log C + a log lam + b log log lam, b in {0, 1}."""
    lam = curve.lambdas
    val = curve.values
    ok = (val > 0) & (lam > 1)
    lam, val = lam[ok], val[ok]
    if len(lam) < min_points:
        raise InsufficientSpan(f"need {min_points} positive points, have {len(lam)}")
    span = math.log10(lam.max() / lam.min())
    if span < min_decades - 1e-12:
        raise InsufficientSpan(f"lambda range spans {span:.2f} decades, need {min_decades}")
    y = np.log(val)
    choices = [force_b] if force_b is not None else [0, 1]
    best = None
    for b in choices:
        coef, cov, bic = _ls(lam, y, b)
        if best is None or bic < best[3] - 1e-9:
            best = (coef, cov, b, bic)
    coef, cov, b, bic = best
    return FitResult(float(math.exp(coef[0])), float(coef[1]), int(b),
                     tuple(tuple(float(v) for v in r) for r in cov), float(bic))


def log_lambdas(lo, hi, steps):
    return list(np.exp(np.linspace(math.log(lo), math.log(hi), int(steps))))
