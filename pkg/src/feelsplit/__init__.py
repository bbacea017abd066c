"""Data-driven federated edge learning simulator with diversity-aware data splitting."""

__version__ = "0.1.0"
