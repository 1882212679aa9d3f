"""Exception hierarchy shared by every engine component."""


class EngineError(Exception):
    """Base class for all engine failures."""


class DocumentSyntaxError(EngineError):
    """Input bytes are not a syntactically valid document.

    Carries the 1-based line/column of the first offending position when
    the underlying parser reports one.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message)


class SchemaError(EngineError):
    """Document is valid syntax but violates the expected shape or vocabulary."""


class IntegrityError(EngineError):
    """Referential problem: dangling endpoint, duplicate id, duplicate edge."""


class RangeError(EngineError):
    """A numeric value is outside its allowed range."""


class UnknownNodeError(EngineError):
    """A node id does not exist in the graph or has the wrong kind."""


class EmptyMappingError(EngineError):
    """No countermeasure in the graph carries any reference."""


class ConflictError(EngineError):
    """Merge fragments collide on the same record or section."""


class EmptyCorpusError(EngineError):
    """Corpus has no document with at least one usable term."""


class DimensionError(EngineError):
    """Matrix/vector shapes are incompatible with the operation."""


class ConvergenceError(EngineError):
    """Iterative solver hit its iteration cap before reaching tolerance."""


class InsufficientPointsError(EngineError):
    """Fewer points than requested clusters."""


class DomainError(EngineError):
    """Argument outside the mathematical domain of the function."""


class NotFoundError(EngineError):
    """Referenced profile, metric or control does not exist."""
