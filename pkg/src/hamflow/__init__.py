"""Spectral flow and Maslov index for families of linear Hamiltonian systems on the real line."""

__version__ = "0.1.0"
