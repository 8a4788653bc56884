"""Numerical laboratory for Loewner chains, conformal maps of lattice domains and SLE."""

__version__ = "0.3.0"
