"""Zero-temperature Domany dynamics on the hexagonal lattice and its
percolation observables."""

__version__ = "0.1.0"
