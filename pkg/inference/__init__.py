"""Exact and approximate inference: oracle, BP/GBP, mean field, DynBP."""
