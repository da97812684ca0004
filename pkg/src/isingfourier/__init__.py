"""Fourier analysis of binary decision rules over Ising-distributed test data."""

__version__ = "0.1.0"
