"""Numerics for the one-big-jump class of distributions."""

__version__ = "0.1.0"
