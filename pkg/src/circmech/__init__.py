"""Simulator of circular mechanisms with endogenous enforcement."""

__version__ = "0.1.0"
