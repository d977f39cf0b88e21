"""Exception hierarchy shared by every pipeline stage."""


class LitSieveError(Exception):
    """Base class for all errors raised by litsieve."""


class ConfigInvalid(LitSieveError, ValueError):
    def __init__(self, field: str, value: object, reason: str = ""):
        self.field = field
        self.value = value
        msg = f"invalid config field {field!r}: {value!r}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)


class StageFailure(LitSieveError):
    """A pipeline stage aborted; cached outputs of earlier stages are kept."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


class EmptyCorpus(LitSieveError):
    pass


class OfflineMiss(LitSieveError):
    """A network request was attempted while running offline."""


# keyword generation / LLM transport
class InsufficientKeywords(LitSieveError):
    pass


class LlmUnavailable(LitSieveError):
    pass


# arXiv ingestion
class FeedMalformed(LitSieveError, ValueError):
    pass


class FetchFailed(LitSieveError):
    pass


# embeddings and scoring
class DimensionMismatch(LitSieveError, ValueError):
    pass


class ZeroVector(LitSieveError, ValueError):
    pass


class ProviderUnavailable(LitSieveError):
    pass


class PartialResponse(LitSieveError):
    pass


class EmptyScores(LitSieveError, ValueError):
    pass


# documents and LLM outputs
class ExtractionFailed(LitSieveError):
    pass


class SchemaViolation(LitSieveError, ValueError):
    pass


class NoJsonFound(LitSieveError, ValueError):
    pass


class DuplicateKey(LitSieveError, ValueError):
    pass
