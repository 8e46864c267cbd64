"""Analytic discs, bracket filtrations and extension cones for generic CR submanifolds."""

__version__ = "0.3.0"
