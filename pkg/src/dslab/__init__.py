"""Exact and certified computations around metric Diophantine approximation."""

__version__ = "0.1.0"
