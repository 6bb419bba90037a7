"""Orbit-method eigenvalue counting for polynomial Schrödinger operators."""
from .poly import MultiPoly, parse, quasi_weights

__version__ = "0.1.0"
