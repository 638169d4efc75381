"""Resolvent kernels, Kunze-Stein bounds and radial spectral checks on hyperbolic space."""

__version__ = "0.1.0"
