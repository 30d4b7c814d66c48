"""Spectral, resolvent and semigroup labs for linearized plane shear flows."""

__version__ = "0.1.0"
