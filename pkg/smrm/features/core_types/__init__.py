"""Shared value types, masks and Gaussian partition helpers."""
