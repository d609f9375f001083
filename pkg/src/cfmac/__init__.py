"""Bounds, gain curves and Monte Carlo tools for MACs with a cooperation facilitator."""

__version__ = "0.1.0"
