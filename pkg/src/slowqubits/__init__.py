"""Slow-driving Lindblad engine for coupled-qubit thermal machines."""

__version__ = "0.1.0"
