"""Exception hierarchy for the toolkit.

Every error raised by stylauth derives from StylauthError so callers can
catch toolkit failures without swallowing programming errors.
"""


class StylauthError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(StylauthError):
    """Invalid or unreadable run configuration."""


class CorpusError(StylauthError):
    """Problem loading or validating corpus material."""


class MissingFileError(CorpusError):
    """A manifest, text, annotation, or resource file does not exist."""


class DuplicateIdError(CorpusError):
    """Two manifest records share the same document id."""


class EmptyTextError(CorpusError):
    """A document contains no tokens after normalization."""


class MissingAuthorError(CorpusError):
    """A manifest record has no author field."""


class UnbalancedQuotationError(CorpusError):
    """A quoted-span marker is opened but never closed."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(message)
        self.byte_offset = byte_offset


class AnnotationError(CorpusError):
    """An annotation sidecar does not align with its document."""


class UnknownTagError(AnnotationError):
    """An annotation row uses a tag outside the declared tagset."""


class FeatureError(StylauthError):
    """Invalid feature configuration or extraction input."""


class LearnerError(StylauthError):
    """Invalid training data or model/input mismatch."""


class DroError(StylauthError):
    """Invalid oversampling input or profile mismatch."""


class EvaluationError(StylauthError):
    """Invalid metric input or evaluation protocol failure."""


class ExperimentError(StylauthError):
    """An experiment cannot be run on the given corpus/config."""
