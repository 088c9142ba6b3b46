"""Shallow-water lattice Boltzmann toolkit."""

__version__ = "0.1.0"
