"""Structured domain randomization for synthetic drone-detection datasets."""

__version__ = "0.1.0"
