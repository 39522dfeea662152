"""Numerical spin geometry on flat and round model spaces."""

__version__ = "0.1.0"
