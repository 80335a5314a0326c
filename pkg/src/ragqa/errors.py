"""Exception hierarchy shared across the engine.

Exit-code mapping used by the CLI: DataError -> 2, ProviderError -> 3.
"""


class RagqaError(Exception):
    """Base class for all engine errors."""


class DataError(RagqaError):
    """Invalid or missing input data: corpora, QA files, indexes, configs."""


class ProviderError(RagqaError):
    """Failure talking to an embedding / rerank / generation provider."""


class ProviderTransportError(ProviderError):
    """Network-level failure; the request may be retried."""


class ProviderContractError(ProviderError):
    """Provider answered, but the response violates the wire contract."""
