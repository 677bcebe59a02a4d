"""Multiple randomization designs for two-sided experiments."""

__version__ = "0.1.0"
