"""Hierarchical-modulation constellation design with BICM-SIC rates."""

__version__ = "0.1.0"
