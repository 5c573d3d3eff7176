"""Encrypted Elo rating updates with zero-knowledge rank proofs."""

__version__ = "0.1.0"
