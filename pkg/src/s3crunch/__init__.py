"""Numerical experiments for near-FLRW stiff-fluid big crunches on the three-sphere."""

__version__ = "0.1.0"
