"""Exception types shared across the simulator."""


class ParseError(ValueError):
    """Syntax error in a molecule or pulse-program source."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class ValidationError(ValueError):
    """A well-formed input that is inconsistent with its context."""


class InvariantError(RuntimeError):
    """A numeric invariant (Hermiticity, unitarity, ...) was violated."""
