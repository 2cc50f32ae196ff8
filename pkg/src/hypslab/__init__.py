"""Numerical laboratory for Schrodinger maps and harmonic analysis on the hyperbolic plane."""

__version__ = "0.1.0"
