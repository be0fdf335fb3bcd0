"""Exception hierarchy shared by every qbfactory module."""


class QbfError(Exception):
    """Base class for all library errors."""


class CapacityError(QbfError):
    """A size limit (polynomial degree, qubit count) was exceeded."""


class FieldDomainError(QbfError, ZeroDivisionError):
    """Inverse of the zero element was requested."""


class EvaluationError(QbfError, ArithmeticError):
    """An element has a pole at the requested parameter value."""

    def __init__(self, p, message=None):
        self.p = p
        super().__init__(message or f"element has a pole at p={p!r}")


class DimensionError(QbfError, ValueError):
    pass


class PostSelectionError(QbfError):
    """The requested measurement branch has zero probability."""


class DegenerateInputError(QbfError, ValueError):
    """Inputs for which a basic operation can never succeed."""


class SynthesisError(QbfError):
    pass


class SingularityError(QbfError, ArithmeticError):
    """A coin function is 0/0 at p and has not been extended."""

    def __init__(self, p, message=None):
        self.p = p
        super().__init__(message or f"coin function is singular at p={p!r}")


class AttemptCapExceeded(QbfError, RuntimeError):
    pass


class DataError(QbfError, ValueError):
    """Malformed or unusable measurement data."""


class ConfigError(QbfError, ValueError):
    pass


class ExprSyntaxError(QbfError, SyntaxError):
    def __init__(self, message, position):
        self.position = position
        super().__init__(f"{message} at position {position}")


class UnknownSymbolError(ExprSyntaxError):
    pass
