"""Exception types shared across the package."""


class HColError(Exception):
    """Base class for all errors raised by hcolpath."""


class GraphParseError(HColError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyGraph(HColError, ValueError):
    pass


class DisconnectedGraph(HColError, ValueError):
    pass


class NoWalk(HColError):
    pass


class EmptySupport(HColError):
    """A boundary condition admits no valid filling."""


class CapExceeded(HColError):
    pass


class ClassMismatch(HColError, ValueError):
    pass


class ConditionViolated(HColError):
    pass


class PathTooShort(HColError, ValueError):
    pass


class NotReached(HColError):
    pass


class ColourIndexError(HColError, IndexError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
