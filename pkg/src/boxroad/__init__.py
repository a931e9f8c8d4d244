"""Roadmaps of real algebraic sets built from certified box enclosures."""

__version__ = "0.1.0"
