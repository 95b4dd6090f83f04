"""Retrievability bias measurement for BM25 under different query-set strategies."""

__version__ = "0.1.0"
