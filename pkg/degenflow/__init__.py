"""Solvers and numerical certificates for degenerate quasilinear parabolic equations"""

__version__ = "1.0.0"
