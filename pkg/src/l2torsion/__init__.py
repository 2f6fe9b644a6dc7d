"""Numerical L2-invariants: densities, determinants, torsion."""

__version__ = "0.1.0"
