"""Iterated minimax and viscosity solutions of contact Hamilton-Jacobi equations."""

__version__ = "0.1.0"
