"""Discrete factor graphs, region graphs and temporal (path) models."""
