from typing import Optional


class PathControlError(Exception):
    """Base class for every error raised by pathctl."""


class GridAlignmentError(PathControlError, ValueError):
    """A time, duration or step does not sit on the expected uniform grid."""


class DimensionMismatchError(PathControlError, ValueError):
    pass


class DomainMismatchError(PathControlError, ValueError):
    """Two paths do not fit together: gaps, overlaps or missing history."""


class NumericalBlowUpError(PathControlError, ArithmeticError):
    def __init__(self, message: str, node: Optional[float] = None):
        if node is not None:
            message = f"{message} (at t={node!r})"
        super().__init__(message)
        self.node = node


class AdaptednessError(PathControlError, LookupError):
    """A policy asked for a history node that lies in its future."""


class SingularSystemError(PathControlError, ArithmeticError):
    pass


class PlayerIndexError(PathControlError, IndexError):
    pass
