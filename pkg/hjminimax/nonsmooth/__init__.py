"""Lipschitz grid functions and Clarke generalized gradients."""
