"""Exception types shared across rdlab.

The CLI maps each class to a distinct exit code.
"""


class RdlabError(Exception):
    """Base class for all rdlab errors."""


class ConfigError(RdlabError, ValueError):
    """A configuration or argument is invalid."""


class ResourceError(RdlabError):
    """An enumeration or search exceeds its configured budget."""


class InvariantViolation(RdlabError):
    """A structural property that must hold by construction was found broken."""


class NotConverged(RdlabError):
    """An iterative solver stopped before meeting its tolerance."""
