"""Coordinate-descent lasso, lasso paths and cross-validation."""
