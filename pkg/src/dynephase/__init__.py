"""Covariant phase-measurement POMs, phase statistics and adaptive-dyne Monte Carlo."""

__version__ = "0.1.0"
