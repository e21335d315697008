"""Connectivity of the random connection model: simulation, exact
finite-density formulas and Chen-Stein bounds."""

__version__ = "0.1.0"
