"""Simulation and analysis of the non-Hermitian edge burst in lossy quantum walks."""

__version__ = "0.1.0"
