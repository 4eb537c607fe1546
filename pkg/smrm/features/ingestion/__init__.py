"""Dataset loading, missingness generation and synthetic data."""
