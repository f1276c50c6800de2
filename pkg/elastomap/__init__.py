"""Local reconstruction of elastic moduli from strain-field maps."""

__version__ = "0.1.0"
