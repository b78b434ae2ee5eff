"""Quasi-stationary analysis of time-changed symmetric stable processes killed at 0."""
__version__ = "0.1.0"
