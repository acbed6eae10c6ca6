"""Simulation and analysis of nearest-neighbour Hamiltonian lattices on a ring."""

__version__ = "0.1.0"
