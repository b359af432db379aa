"""Spectral laboratory for half-plane magnetic Schrodinger operators near Landau thresholds."""

__version__ = "0.1.0"
