"""thinflow: a 2D vorticity simulation laboratory for multi-scale initial data."""

__version__ = "0.1.0"
