"""Numerical laboratory for bistable reaction-diffusion equations in exterior domains."""
__version__ = "0.1.0"
