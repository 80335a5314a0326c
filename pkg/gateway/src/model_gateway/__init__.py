"""model_gateway: HTTP service for the embed / rerank / generate contracts."""

__version__ = "0.1.0"
