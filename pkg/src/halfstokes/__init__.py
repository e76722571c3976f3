"""Numerical laboratory for the Stokes semigroup on the half-space in weighted L^p."""

__version__ = "0.1.0"
