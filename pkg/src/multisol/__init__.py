"""Training laboratory for learning any one of many valid puzzle solutions."""

__version__ = "0.1.0"
