"""Knowledge-graph-assisted road sign annotation toolkit."""

__version__ = "0.1.0"
