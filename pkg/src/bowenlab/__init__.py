"""Shrinking-target dimension laboratory for non-autonomous conformal IFS."""

__version__ = "0.1.0"
