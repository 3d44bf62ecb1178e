"""Flat hermitian metrics: Dirichlet solver and annulus factorization."""

__version__ = "1.0.0"
