"""Cooling a mechanical mode by heating another: full, reduced and mean-field models."""

__version__ = "0.1.0"
