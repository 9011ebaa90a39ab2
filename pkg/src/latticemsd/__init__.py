"""Lattice points in dilated convex bodies: counting, mean-square discrepancy, Fourier tools."""
__version__ = "0.1.0"
