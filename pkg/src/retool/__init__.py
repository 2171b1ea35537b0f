"""Numerical tools for relative equilibria of symmetric Hamiltonian systems."""

__version__ = "0.1.0"
