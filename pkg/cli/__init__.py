"""Command-line entry points, model files and result writers."""
