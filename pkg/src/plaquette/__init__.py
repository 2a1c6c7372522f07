"""Simulation and analysis of weight-four parity checks on a five-qubit CR plaquette."""

__version__ = "0.1.0"
