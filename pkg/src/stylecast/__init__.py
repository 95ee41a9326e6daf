"""Formality-sensitive translation toolkit with synthetic supervision."""

from .schemes import ControlScheme, Style

__version__ = "0.1.0"

__all__ = ["ControlScheme", "Style", "__version__"]
