"""Exception types raised by rffkpkm."""


class InvalidInput(ValueError):
    """Raised when an argument violates a precondition (shape, range, finiteness)."""


class ParseError(ValueError):
    """Raised when a data file cannot be parsed.

    The offending 1-based line number is kept in ``lineno`` when known.
    """

    def __init__(self, message, lineno=None, path=None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if lineno is not None:
            where += f":{lineno}" if where else f"line {lineno}"
        super().__init__(f"{where}: {message}" if where else message)


class ValidationError(ValueError):
    """Raised when a dataset or manifest is internally inconsistent."""
