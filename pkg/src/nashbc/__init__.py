"""Branch-and-cut computation of approximate pure Nash equilibria for
mixed-integer standard and generalized Nash games."""

__version__ = "0.1.0"
