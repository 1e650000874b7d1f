"""Nonhomogeneous dyadic harmonic analysis on finite dyadic trees."""
__version__ = "0.1.0"
