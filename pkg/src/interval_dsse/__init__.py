"""Interval state estimation for unbalanced distribution feeders."""

__version__ = "0.1.0"
