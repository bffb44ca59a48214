"""Exact Hopf-algebraic toolkit for renormalising branched rough paths and
transferring them to anisotropic geometric rough paths."""

__version__ = "0.1.0"
