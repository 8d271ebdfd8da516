"""Parallel-in-time solvers for fourth-order parabolic problems."""

__version__ = "0.1.0"
