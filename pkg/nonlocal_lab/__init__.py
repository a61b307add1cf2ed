"""Simulation and audit of instantaneous measurements of nonlocal variables."""

__version__ = "0.1.0"
