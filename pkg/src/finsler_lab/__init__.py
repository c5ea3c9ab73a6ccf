"""Spray and Finsler geometry engine: exact derivatives, geometric invariants,
Hamel/Funk classification and symmetry checks, geodesic flows."""

__version__ = "0.1.0"
