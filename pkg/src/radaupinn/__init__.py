"""Radau IIA physics-informed neural networks for semi-explicit index-2 DAEs."""

__version__ = "0.1.0"
