"""Numerical toolkit for parabolic random continued fractions."""

__version__ = "0.1.0"
