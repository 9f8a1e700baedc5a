"""Kinetic Ising experiments, the aggregate-variable bridge and the motion-detection demo."""
