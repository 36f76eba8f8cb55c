"""Typology-grounded phonology: contrast consistency, stream decoding, inventory induction."""

__version__ = "0.1.0"
