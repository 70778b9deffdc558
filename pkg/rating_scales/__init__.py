"""Credit rating-scale definition as a QUBO problem."""

__version__ = "0.1.0"
