"""Risk analytics for open-source repository maintenance cessation."""

__version__ = "0.1.0"
