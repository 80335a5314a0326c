"""ragqa: hybrid BM25 + dense retrieval question answering engine."""

__version__ = "0.1.0"
