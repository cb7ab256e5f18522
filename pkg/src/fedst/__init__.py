"""Federated shapelet search and transformation over secret-shared series."""

__version__ = "0.1.0"
