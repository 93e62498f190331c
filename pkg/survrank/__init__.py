"""Survrank - survival analysis as pairwise ranking against anchor subjects."""

__version__ = "0.1.0"
