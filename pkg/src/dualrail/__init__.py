"""Dual-rail early-output adders: generation, event-driven simulation and analysis."""

__version__ = "0.1.0"
