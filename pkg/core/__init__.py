"""Core solver logic for the Ripa moving-mesh DG project."""

__version__ = "0.1.0"
