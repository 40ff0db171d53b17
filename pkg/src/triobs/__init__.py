"""Observability analysis and triangular canonical forms for control-affine systems."""

__version__ = "0.1.0"
