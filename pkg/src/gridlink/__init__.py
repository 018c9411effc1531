"""Density-grid day classification and census linkage toolkit."""

__version__ = "0.1.0"
