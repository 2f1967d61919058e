"""Hormonally regulated recursive reasoning engine and benchmark harness."""

__version__ = "0.1.0"
