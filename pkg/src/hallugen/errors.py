"""Exception taxonomy shared across the package."""


class HallugenError(Exception):
    """Base class for all package errors."""


class ConfigError(HallugenError):
    """Invalid configuration: bad roster, unresolved provider name, bad knob."""


class CorpusError(HallugenError):
    """Corpus file unreadable or contains zero valid rows."""


class ProviderError(HallugenError):
    """Base class for provider-gateway failures."""


class TransportError(ProviderError):
    """Transient transport failure (connection, timeout, 5xx) after retries."""


class AuthError(ProviderError):
    """Authentication rejected by the backend."""


class EmptyReplyError(ProviderError):
    """Backend returned an empty completion."""


class ScoreRangeError(ProviderError):
    """NLI backend returned a score outside [0, 1]."""


class DimensionMismatchError(ProviderError):
    """Embedding dimension changed within one run."""


class JudgeParseError(ProviderError):
    """Judge reply did not match the constrained A/B format after a re-ask."""


class GenerationParseError(ProviderError):
    """Generator reply missing the category token or the answer text."""


class VerdictParseError(ProviderError):
    """Detector reply did not match the constrained verdict format."""


class PipelineError(HallugenError):
    """Item-level pipeline failure (the item is reported as errored)."""
