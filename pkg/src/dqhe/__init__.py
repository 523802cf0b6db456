"""Driven XYZ qubit chains: adiabatic ramps, generalized force, Berry curvature and Chern numbers."""

__version__ = "0.1.0"
