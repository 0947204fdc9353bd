"""Coherence-based model improvement as Bregman projection on finite prompt/outcome spaces."""

__version__ = "0.1.0"
