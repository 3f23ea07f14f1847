"""Finite-difference spectral laboratory for 1D Bloch-Torrey operators."""

__version__ = "0.1.0"
