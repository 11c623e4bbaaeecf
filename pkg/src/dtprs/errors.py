class DtprsError(Exception):
    """Base class for all errors raised by the package."""


class UsageError(DtprsError):
    pass


class BoundViolation(DtprsError):
    """A tree left the declared depth or simple-path bound."""

    def __init__(self, message, tree=None, measured=None, bound=None):
        super().__init__(message)
        self.tree = tree
        self.measured = measured
        self.bound = bound


class RecursiveDtdError(DtprsError):
    def __init__(self, cycle):
        super().__init__("recursive DTD, tag cycle: " + " -> ".join(cycle))
        self.cycle = tuple(cycle)


class PreconditionError(DtprsError):
    pass


class AlphabetError(DtprsError):
    pass


class SpecError(DtprsError):
    """Parse or semantic error in a source text, with position."""

    def __init__(self, code, message, line=0, col=0):
        super().__init__(f"{line}:{col}: {code}: {message}")
        self.code = code
        self.line = line
        self.col = col
