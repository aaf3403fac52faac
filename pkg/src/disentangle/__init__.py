"""Disentangling nonlinear Schrodinger dynamics for bipartite spin systems."""
__version__ = "0.1.0"
