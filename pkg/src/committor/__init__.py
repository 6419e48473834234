"""Committor functions of overdamped Langevin processes, computed by
minimizing the Dirichlet-energy form of the backward Kolmogorov equation
over tanh networks augmented with explicit singular basis functions."""

__version__ = "0.1.0"
