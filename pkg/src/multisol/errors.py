"""Exception hierarchy shared across the package.

CLI maps InputError (and subclasses) to exit code 1 and NumericError /
anything unexpected to exit code 2.
"""


class MultisolError(Exception):
    pass


class InputError(MultisolError):
    """Malformed arguments, files, or data passed into an operation."""


class ConfigError(InputError):
    """Invalid or inconsistent configuration values."""


class GenerationError(ConfigError):
    """Dataset generation could not satisfy the requested constraints."""


class ParseError(InputError):
    """A serialized artifact could not be decoded."""


class NumericError(MultisolError):
    """Non-finite values encountered where finite math is required."""
