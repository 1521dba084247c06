"""Exception types shared across the package."""


class LevelSetError(Exception):
    """Base class for all package errors."""


class UsageError(LevelSetError, ValueError):
    """Bad argument value or shape supplied by the caller."""


class UnsupportedError(LevelSetError, ValueError):
    """The request is well formed but outside what a routine can handle."""


class PreconditionError(LevelSetError, ValueError):
    """A documented precondition of a routine does not hold."""


class SpecParseError(UsageError):
    """A function spec string could not be parsed.

    ``position`` is the 0-based character offset of the offending token and
    ``expected`` lists the tokens that would have been accepted there.
    """

    def __init__(self, text, position, expected, found):
        self.text = text
        self.position = position
        self.expected = tuple(expected)
        self.found = found
        pointer = " " * position + "^"
        super().__init__(
            f"cannot parse function spec at position {position}: "
            f"expected {' or '.join(self.expected)}, found {found!r}\n"
            f"  {text}\n  {pointer}"
        )
