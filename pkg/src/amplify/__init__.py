"""Numerical verification of the amplification method for geodesic periods."""

__version__ = "0.1.0"
