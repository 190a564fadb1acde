"""Fast (Strassen-like) matrix multiplication with stability analysis and scaling."""

__version__ = "0.1.0"
