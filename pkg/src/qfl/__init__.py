"""Integrable conservative systems on S^2 with quartic first integrals."""

__version__ = "0.1.0"
