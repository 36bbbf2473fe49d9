"""Numerical toolkit for Losik characteristic classes of diffeomorphism pseudogroups."""

__version__ = "0.1.0"
