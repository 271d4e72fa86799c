"""Probabilistic location forecasting and search-zone planning for missing-person cases."""

__version__ = "0.1.0"
