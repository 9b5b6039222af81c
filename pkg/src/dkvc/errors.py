"""Exception taxonomy shared across the package.

Every error raised on a documented failure path derives from :class:`DkvcError`
so callers (and the command-line layer) can map failures to exit codes without
string matching.
"""


class DkvcError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(DkvcError):
    """An array argument has the wrong dimensionality or an inconsistent size."""


class ConfigError(DkvcError):
    """Model pieces disagree with each other or with their configuration."""


class InputError(DkvcError):
    """An input is empty or otherwise unusable (too few voiced frames, ...)."""


class DataError(DkvcError):
    """A file on disk failed to parse or validate."""


class NumericalError(DkvcError):
    """A numerical operation failed (factorization, non-finite loss/gradient)."""


class UsageError(DkvcError):
    """The command line was malformed."""
