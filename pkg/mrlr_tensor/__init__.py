"""Multi-resolution low-rank (MRLR) tensor decomposition."""

__version__ = "0.1.0"
