"""Highway accident detection from 2-minute lane sensor readings."""

__version__ = "0.1.0"
