"""Blind community detection from low-rank excitations of graph filters."""

__version__ = "0.1.0"
