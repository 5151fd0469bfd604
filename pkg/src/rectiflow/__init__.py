"""Steady-state heat rectification of spin-boson qubit devices."""

__version__ = "0.1.0"
