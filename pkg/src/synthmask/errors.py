"""Exception and warning types shared across the pipeline."""


class SynthmaskError(Exception):
    """Base class for all pipeline errors."""


class SchemaError(SynthmaskError):
    """An input file does not have the expected columns or cell types."""


class DuplicateKeyError(SchemaError):
    """A note_id appears more than once in the letters file."""

    def __init__(self, note_id: str):
        super().__init__(f"duplicate note_id: {note_id!r}")
        self.note_id = note_id


class SpanValidationError(SynthmaskError):
    """One or more annotation spans fall outside their letter.

    ``violations`` holds (note_id, start, end, reason) tuples for every
    offending row, not just the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = ", ".join(
            f"{nid}[{start}:{end}] {reason}" for nid, start, end, reason in self.violations
        )
        super().__init__(f"{len(self.violations)} invalid span(s): {lines}")


class OrphanAnnotationWarning(UserWarning):
    """An annotation references a note_id absent from the letters file."""

    def __init__(self, span):
        self.span = span
        super().__init__(
            f"annotation for unknown note_id {span.note_id!r} "
            f"({span.start}:{span.end}) skipped"
        )


class BackendError(SynthmaskError):
    """Base class for prediction-backend failures."""


class TransportError(BackendError):
    """The remote backend could not be reached or kept failing."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(f"{message} (after {attempts} attempt(s))")
        self.attempts = attempts


class ProtocolError(BackendError):
    """The backend answered, but the payload violates the wire contract."""


class CapabilityError(BackendError):
    """The backend does not support the requested operation or layer."""


class AssemblyError(SynthmaskError):
    """A letter could not be reassembled because a chunk is missing or failed."""


class ConfigError(SynthmaskError):
    """A run configuration is invalid (unknown key, bad value, missing path)."""
