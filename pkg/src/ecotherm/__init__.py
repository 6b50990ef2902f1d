"""Statistical thermodynamics of economic money functions."""

__version__ = "0.1.0"
