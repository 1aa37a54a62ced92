"""Density-matrix simulation of liquid-state NMR quantum-information experiments."""

__version__ = "0.1.0"
