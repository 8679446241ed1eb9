"""Synthetic truck-fleet failure-risk classification toolkit."""

__version__ = "0.1.0"
