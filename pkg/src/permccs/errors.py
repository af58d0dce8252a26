"""Exception types shared across the package."""


class PermCCSError(Exception):
    """Base class for every error raised by permccs."""


class UnboundVariable(PermCCSError):
    def __init__(self, name):
        super().__init__(f"unbound variable {name!r}")
        self.name = name


class Overflow(PermCCSError):
    pass


class ArityMismatch(PermCCSError):
    pass


class UnknownDefinition(PermCCSError):
    def __init__(self, name):
        super().__init__(f"unknown definition {name!r}")
        self.name = name


class ParseError(PermCCSError):
    """Concrete syntax error with a 1-based source position."""

    def __init__(self, msg, line=0, col=0):
        super().__init__(f"{line}:{col}: {msg}")
        self.msg = msg
        self.line = line
        self.col = col


# the name used in the docs; kept distinct from the builtin
SyntaxError_ = ParseError


class DuplicatePermission(ParseError):
    pass


class EnvInvariantViolation(PermCCSError):
    pass


class StuckOnOpenTerm(PermCCSError):
    pass


class BudgetExhausted(PermCCSError):
    def __init__(self, msg="budget exhausted", partial=None, truncated=True):
        super().__init__(msg)
        self.partial = partial
        self.truncated = truncated


class CapExceeded(PermCCSError):
    pass


class NotWellResourced(PermCCSError):
    pass


class OpenFormula(PermCCSError):
    pass


class TooManyVariables(PermCCSError):
    pass
