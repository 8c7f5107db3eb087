"""Li-Yau and Harnack estimates for the heat equation on weighted graphs."""

__version__ = "0.1.0"
