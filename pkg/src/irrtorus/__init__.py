"""Resonances, normal forms and truncated dynamics of cubic NLS on 2D tori."""

__version__ = "0.1.0"
