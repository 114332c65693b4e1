"""Simulator for two-qubit Bell-state stabilization in a dispersive
qubit-qubit-cavity system: a driven-dissipative scheme, a measurement-based
feedback scheme, and a nested heralding protocol on top of either."""

__version__ = "0.1.0"
