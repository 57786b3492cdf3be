"""Elaborating compiler for a lambda calculus with intersections, unions and merges."""

__version__ = "0.1.0"
