"""Computation modules: one per concern."""
