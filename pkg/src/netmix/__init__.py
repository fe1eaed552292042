"""Minimum-cost linear network mixing for general connections of continuous flows."""

__version__ = "0.1.0"
