"""Training pipeline for the prototyping encoder."""

__version__ = "0.1.0"
