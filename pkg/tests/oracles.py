"""Independent reference computations used by the tests.

Spectra here come from a sinc-DVR (Colbert-Miller) discretization, which
shares no code with the finite-difference counts in the package.
"""
import math

import numpy as np
from scipy import integrate
from scipy.linalg import eigh


def dvr_levels(potential, L, h, emax):
    x = np.arange(-L, L + h / 2, h)
    n = len(x)
    i = np.arange(n)
    D = i[:, None] - i[None, :]
    with np.errstate(divide="ignore"):
        T = np.where(D == 0, math.pi ** 2 / 3, 2.0 / np.where(D == 0, 1, D) ** 2)
    T = T * ((-1.0) ** np.abs(D)) / h ** 2
    H = T + np.diag(potential(x))
    return eigh(H, eigvals_only=True, subset_by_value=(-np.inf, emax))


def shifted_levels(c, q, beta, emax, h=0.05):
    """Levels < emax of -d^2 + (c z^q + beta)^2."""
    L = ((2 * math.sqrt(emax) + abs(beta)) / abs(c)) ** (1.0 / q) + 2.0
    return dvr_levels(lambda z: (c * z ** q + beta) ** 2, L, h, emax)


def spectral_sum(c, q, gamma, B, top=40.0):
    """int_{-B}^{B} sum_j e_j(beta)^-gamma dbeta with e_j from the DVR."""
    def f(beta):
        e = shifted_levels(c, q, beta, top * max(1.0, abs(beta)) ** 0.5 + top)
        return float(np.sum(e ** (-gamma)))
    val, _ = integrate.quad(f, -B, B, limit=200, epsrel=1e-6)
    return val


def kappa_inhomog_oracle(B=400.0):
    # doubly degenerate wells at +-sqrt|beta|: e ~ 2 (2j+1) sqrt|beta| for beta -> -oo
    body = spectral_sum(1.0, 2, 3.5, B)
    coef = 2 * sum((2 * (2 * j + 1)) ** -3.5 for j in range(2000))
    tail = coef * (4 / 3) * B ** -0.75
    return 6 / (7 * math.pi) * (body + tail)


def kappa_strong_oracle(k, l, B=400.0):
    gamma = (l + k + 2) / (2 * l)
    body = spectral_sum(1.0 / (k + 1), k + 1, gamma, B)
    # single well where w^(k+1)/(k+1) = -beta: e_j ~ (2j+1) ((k+1)|beta|)^(k/(k+1))
    s = gamma * k / (k + 1)
    coef = sum((2 * j + 1) ** -gamma for j in range(20000)) * (k + 1) ** (-s)
    wells = 2 if (k + 1) % 2 else 1   # both signs of beta carry a well when k+1 is odd
    tail = wells * coef * B ** (1 - s) / (s - 1)
    return (k + 2) / (math.pi * (l + k + 2)) * (body + tail)
