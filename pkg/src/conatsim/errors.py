"""Exception hierarchy shared by all engines and the CLI."""


class ConatError(Exception):
    """Base class; ``code`` is the CLI exit status for this failure."""

    code = 1


class InvalidParameter(ConatError, ValueError):
    code = 1


class StaleModeError(InvalidParameter):
    """A mode was referenced after it had been measured and removed."""


class SymbolicInputError(ConatError, ValueError):
    """A variance was requested for a form that still holds input quadratures."""


class TopologyError(ConatError, ValueError):
    code = 2
