"""Kernels, integrators and the closed-loop simulator."""
