"""Paradifferential calculus toolkit for quasilinear NLS on the circle."""
