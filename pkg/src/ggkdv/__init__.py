"""Pseudospectral simulator and verification harness for a damped
coupled-KdV system with periodic boundary conditions."""

__version__ = "0.1.0"
