"""Exception hierarchy.

Validators never raise for violations; they return a ValidationReport.
Exceptions are for inputs that cannot be processed at all and for
constructions whose preconditions fail.
"""
from typing import Any, Optional


class CoarseError(Exception):
    """Base class for all errors raised by coarse_towers."""


class InputError(CoarseError):
    """Malformed input file, unknown identifier or invalid parameter."""


class UnknownPoint(InputError):
    def __init__(self, point: str, where: str = "space"):
        super().__init__(f"Unknown {where} id: {point!r}")
        self.point = point


class SizeCapExceeded(CoarseError):
    def __init__(self, what: str, size: int, cap: int):
        super().__init__(f"{what} needs {size} elements, cap is {cap}")
        self.what = what
        self.size = size
        self.cap = cap


class PreconditionFailed(CoarseError):
    """A construction precondition fails; `level` and `inequality` locate it."""

    def __init__(self, message: str, level: Optional[int] = None,
                 inequality: Optional[str] = None):
        super().__init__(message)
        self.level = level
        self.inequality = inequality


class TruncationExhausted(CoarseError):
    """The tower is too short for the next synthesis step.

    `partial` holds whatever was measured before the construction stopped.
    """

    def __init__(self, message: str, needed_height: Optional[int] = None, partial: Any = None):
        if needed_height is not None:
            message = f"{message} (estimated height needed: {needed_height})"
        super().__init__(message)
        self.needed_height = needed_height
        self.partial = partial
