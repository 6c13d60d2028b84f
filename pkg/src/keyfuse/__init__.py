"""Keyphrase extraction by fusing contextual text vectors with graph embeddings."""

__version__ = "0.1.0"
