"""Exception hierarchy shared across the package."""


class GrushinError(Exception):
    """Base class for all errors raised by grushin_pohozaev."""


class DomainRangeError(GrushinError, ValueError):
    """A point, shell or mapped image falls outside the computational box."""


class SingularWeightError(GrushinError, ArithmeticError):
    """|grad u|^(p-2) is singular (p < 2, no regularization, grad u = 0)."""


class SingularSlabError(GrushinError, ValueError):
    """The subdomain meets the degenerate set {x = 0} while gamma < 1."""


class UndefinedRatioError(GrushinError, ArithmeticError):
    """A ratio was requested for the zero field."""


class NonlinearityParseError(GrushinError, ValueError):
    """Syntax or catalog error while parsing a nonlinearity expression.

    Parameters
    ----------
    message : str
        Human readable description.
    position : int
        Zero-based character offset of the offending token.
    token : str
        The offending token text (empty at end of input).
    """

    def __init__(self, message, position=0, token=""):
        self.position = position
        self.token = token
        super().__init__(f"{message} at position {position} (token {token!r})")


class DivergenceError(GrushinError, RuntimeError):
    """Picard iteration diverged; carries the change trace collected so far."""

    def __init__(self, message, trace):
        self.trace = list(trace)
        super().__init__(message)


class ConfigError(GrushinError, ValueError):
    """Invalid run configuration."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
