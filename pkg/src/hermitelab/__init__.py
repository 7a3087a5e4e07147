"""Numerical laboratory for integral functionals of Hermite-driven moving averages."""

__version__ = "0.1.0"
