"""Graphical lasso for sparse precision estimation."""
