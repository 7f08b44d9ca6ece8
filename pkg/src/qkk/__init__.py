"""Kramers-Kronig detection in the quantum regime: simulation toolkit."""

__version__ = "0.1.0"
