"""Exception types shared across the package."""


class Se3dsError(Exception):
    """Base class for all package-specific errors."""


class AntipodalError(Se3dsError):
    """Log map (or an operation built on it) hit a near-antipodal pair.

    The log map is undefined at geodesic distance pi; we refuse anything
    closer than ``pi - 1e-6``.
    """


class NoConvergenceError(Se3dsError):
    """An iterative routine exhausted its iteration budget."""


class DegenerateClusterError(Se3dsError):
    """Mixture fitting could not produce clusters with enough members."""


class InsufficientDataError(Se3dsError):
    """Too few samples for the requested statistic."""


class TooShortError(Se3dsError):
    """A demonstration has fewer samples than preprocessing requires."""


class EmptySequenceError(Se3dsError):
    """An operation received an empty trajectory or point list."""


class InvalidPathError(Se3dsError):
    """An alignment path is empty or indexes outside its sequences."""


class DimensionMismatchError(Se3dsError):
    """Array arguments disagree in shape with the model or each other."""


class ParseError(Se3dsError):
    """A file or CLI argument failed validation."""
