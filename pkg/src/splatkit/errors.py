"""Exception types shared across the toolkit."""


class SplatkitError(Exception):
    """Base class for all toolkit errors."""


class ParseError(SplatkitError):
    """Fatal error while reading an external file."""


class InvalidParameterError(SplatkitError):
    """An operation received arguments violating its preconditions."""
