"""Wrinkled Legendrian isotopies traced into exact Lagrangian cobordisms, with numerical certificates."""

__version__ = "0.1.0"
