"""Exception types raised across the package."""


class KlodsError(ValueError):
    """Base class for all errors raised by this package."""


class InsufficientSamplesError(KlodsError):
    pass


class DimensionMismatchError(KlodsError):
    pass


class NotPositiveDefiniteError(KlodsError):
    pass


class DomainError(KlodsError):
    """Argument outside the domain of a mathematical function."""


class InvalidSplitError(KlodsError):
    pass


class DegenerateDataError(KlodsError):
    """Zero-variance columns or other data the statistic cannot handle."""


class SchemaError(KlodsError):
    """A JSON document failed validation; ``path`` locates the bad field."""

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class FormatError(KlodsError):
    """Malformed matrix file. ``offset`` is a byte offset (NPY) or line number (CSV)."""

    def __init__(self, message, offset=None, unit="byte"):
        self.offset = offset
        self.unit = unit
        where = f" at {unit} {offset}" if offset is not None else ""
        super().__init__(f"{message}{where}")
