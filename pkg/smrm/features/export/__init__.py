"""Artifact writing: tables, heatmaps and the run metadata sidecar."""
