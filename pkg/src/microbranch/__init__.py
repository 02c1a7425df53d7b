"""Microstructure constructions, energies and scaling laws for two-well martensite and crystal plasticity models."""

__version__ = "0.1.0"
