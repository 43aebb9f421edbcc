"""Exception types shared across the package."""


class GridShareError(Exception):
    """Base class for library-specific failures."""


class LengthMismatchError(GridShareError, ValueError):
    """Operands or keys whose byte lengths disagree."""


class InsufficientSharesError(GridShareError):
    """Not enough shares (or no valid 2x2 submatrix) to decode."""


class IntegrityError(GridShareError):
    """Conflicting share, cell, or fragment content for the same slot."""


class MalformedHeaderError(GridShareError, ValueError):
    """Packet header fails structural validation."""


class DispatchError(GridShareError):
    """A sender could not hand shares to an uplink agent."""
