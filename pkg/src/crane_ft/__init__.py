"""Finite-time boundary control of an overhead crane with a flexible cable."""

__version__ = "1.0.0"
