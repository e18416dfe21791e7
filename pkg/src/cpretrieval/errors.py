"""Exception hierarchy shared by the whole pipeline.

Errors fall into four families (parse, validation, config, transport) so
that the command-line layer can map them onto distinct exit codes.
"""


class CPRetrievalError(Exception):
    """Base class for every library-raised error."""


class ParseError(CPRetrievalError):
    """Malformed input text: bad column counts, bad tagged units, ..."""


class PromptFormatError(ParseError):
    """A tagged line unit could not be split into token and label."""


class ValidationError(CPRetrievalError):
    """Well-formed input that violates a data contract."""


class SchemeViolationError(ValidationError):
    """A label is outside the declared scheme, or BIO structure is broken."""


class AlignmentError(ValidationError):
    """Predictions and gold do not line up sentence-by-sentence."""


class IntegrityError(ValidationError):
    """Stored or returned vectors disagree with the provider declaration."""


class NormalizationError(ValidationError):
    """Pool-wide maximum is not positive; ranking would be meaningless."""


class RetrievalError(ValidationError):
    """An embedding is unavailable: cache miss and no reachable provider."""


class OracleError(ValidationError):
    """The oracle client could not interpret a prompt."""


class ConfigError(CPRetrievalError):
    """Missing, contradictory, or out-of-range configuration."""


class TransportError(CPRetrievalError):
    """Endpoint unreachable or retries exhausted."""


class RequestError(TransportError):
    """Endpoint rejected the request outright (HTTP 4xx)."""
