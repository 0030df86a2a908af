"""Numerical laboratory for strongly interacting multi-bubble blow-up
in the two-dimensional focusing cubic Schrodinger equation."""

__version__ = "0.1.0"
