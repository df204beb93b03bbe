"""Interference alignment and network diagonalization over finite fields."""

__version__ = "0.1.0"
