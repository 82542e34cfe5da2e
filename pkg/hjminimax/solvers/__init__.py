"""Iterated minimax solver, viscosity references and wave fronts."""
