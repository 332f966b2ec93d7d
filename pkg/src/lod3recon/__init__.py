"""Semantic LoD3 building reconstruction from laser rays, solid priors, and probability maps."""

__version__ = "0.1.0"
