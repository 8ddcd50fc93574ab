class XLinkerError(Exception):
    """Base class for every error raised by `xlinker`."""


class ParseError(XLinkerError, ValueError):
    """
    A vocabulary, corpus or training file line could not be parsed.

    Arguments:
        message: What was wrong with the line.
        line_number: 1-based line number in the input, if known.
    """

    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = "line {}: {}".format(line_number, message)
        super().__init__(message)


class IntegrityError(XLinkerError, ValueError):
    """A knowledge base violates one of its structural invariants."""

    def __init__(self, message, identifiers=()):
        self.identifiers = tuple(identifiers)
        if self.identifiers:
            message = "{}: {}".format(message, ", ".join(self.identifiers))
        super().__init__(message)


class UnknownConceptError(XLinkerError, KeyError):
    def __init__(self, identifier):
        self.identifier = identifier
        super().__init__(identifier)

    def __str__(self):
        return "unknown concept identifier {!r}".format(self.identifier)


class EmptyCorpusError(XLinkerError, ValueError):
    pass


class ConvergenceError(XLinkerError, RuntimeError):
    """
    Power iteration did not reach the requested tolerance.

    Arguments:
        message: Description of the failure.
        iterate: The last iterate computed.
        iterations: Number of iterations performed.
    """

    def __init__(self, message, iterate=None, iterations=0):
        self.iterate = iterate
        self.iterations = iterations
        super().__init__(message)


class ModelFormatError(XLinkerError, ValueError):
    pass
