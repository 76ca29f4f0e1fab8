"""Planar Filippov vector fields, their branching trajectories and symbolic dynamics."""

__version__ = "0.1.0"
