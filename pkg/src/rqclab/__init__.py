"""Random quantum circuit learning and scrambling toolkit."""
__version__ = "0.1.0"
