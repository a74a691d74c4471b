"""Curl eigenvalue laboratory for solids of revolution."""

__version__ = "0.1.0"
