"""GDPC Shared Library — numerical primitives, models and I/O used by every estimator."""
__version__ = "1.0.0"
