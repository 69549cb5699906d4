"""Coupled internal-state / gradient-sensing velocity-jump simulations with
asymptotic variance reduction."""

__version__ = "0.1.0"
