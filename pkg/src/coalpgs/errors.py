"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
InvariantError / SequencingError -> 3.
"""


class CoalpgsError(Exception):
    """Base class for all package errors."""


class ConfigError(CoalpgsError):
    """Invalid run configuration or invalid model parameters."""


class DataError(CoalpgsError):
    """Malformed input data (alignment files, checkpoints)."""


class InvariantError(CoalpgsError):
    """A structural invariant of a genealogy, model or message store is violated."""


class SequencingError(CoalpgsError):
    """An operation was called before its prerequisites were computed."""
