"""Exception types shared across the package."""


class PdgError(Exception):
    """Base class for all errors raised by this package."""


class UnknownVariable(PdgError):
    pass


class InvalidCpd(PdgError):
    pass


class DuplicateLabel(PdgError):
    pass


class ShapeMismatch(PdgError):
    pass


class StateSpaceTooLarge(PdgError):
    pass


class UnsupportedHardStructure(PdgError):
    """Hard (infinite-confidence) edges overlap on targets or form a cycle."""


class AmbiguousStructure(PdgError):
    """The hard edges do not pin a unique joint distribution for the
    high-gamma limit."""


class AlternatePathUnavailable(PdgError):
    """The single-expectation score formula requires finite confidences."""


class ZeroFactor(PdgError):
    pass


class EmptyDataset(PdgError):
    pass


class UnknownLoss(PdgError):
    pass


class NotASimplex(PdgError):
    pass


class SpecSyntaxError(PdgError):
    """Malformed text in a .pdg document."""

    def __init__(self, message: str, line: int, column: int, token: str = ""):
        super().__init__(f"line {line}, col {column}: {message}"
                         + (f" (at {token!r})" if token else ""))
        self.line = line
        self.column = column
        self.token = token


class SpecSemanticError(PdgError):
    """Well-formed text that names undeclared things or mismatched shapes."""

    def __init__(self, message: str, line: int = 0, column: int = 0,
                 token: str = ""):
        loc = f"line {line}, col {column}: " if line else ""
        super().__init__(loc + message + (f" (at {token!r})" if token else ""))
        self.line = line
        self.column = column
        self.token = token


class DuplicateName(SpecSemanticError):
    pass
