"""Numerical laboratory for weighted p-Laplacian, clamped-plate and buckling
first eigenvalues and the inequalities relating them."""

__version__ = "0.1.0"
