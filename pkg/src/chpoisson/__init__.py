"""Numerical toolkit for controlled Hamiltonian systems on Poisson manifolds."""

__version__ = "0.1.0"
