"""Exception hierarchy shared by every tracelab module."""


class TraceError(ValueError):
    """Base class for data errors raised while processing a trace."""


class InvalidInterval(TraceError):
    pass


class NegativeDuration(InvalidInterval):
    """A stay whose end is not strictly after its start."""


class ConflictingAssociation(TraceError):
    """One node associated with two locations at the same instant."""


class MalformedLine(TraceError):
    def __init__(self, lineno, message):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class EmptyInput(TraceError):
    pass


class EmptyTrace(EmptyInput):
    pass


class GapTooLarge(TraceError):
    pass


class DegenerateVariance(TraceError):
    pass


class InvalidDegree(TraceError):
    pass


class DegenerateReference(TraceError):
    pass


class InsufficientPoints(TraceError):
    pass


class NonConvergence(TraceError):
    pass


class NegativeX(TraceError):
    pass


class UnknownSource(TraceError):
    pass


class InvalidSpec(TraceError):
    pass
