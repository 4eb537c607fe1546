"""Sparse multivariate regression for responses with missing values."""

__version__ = "1.0.0"
