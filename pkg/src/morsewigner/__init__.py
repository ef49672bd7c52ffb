"""Wigner and semiclassical phase-space distributions of the Morse oscillator."""

__version__ = "0.1.0"
