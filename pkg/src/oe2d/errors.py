"""Exception hierarchy. CLI exit codes map onto these classes."""

from __future__ import annotations


class OE2DError(Exception):
    exit_code = 1


class StructuralError(OE2DError, ValueError):
    """Shapes, indices or measure validity do not line up."""

    exit_code = 2


class ConfigurationError(OE2DError, ValueError):
    exit_code = 2


class DomainError(OE2DError, ValueError):
    """A scalar argument lies outside its admissible range."""

    exit_code = 2


class ResourceError(OE2DError, RuntimeError):
    """An enumeration or grid would exceed its configured budget."""

    exit_code = 4

    def __init__(self, message: str, budget: str = "", required: float = 0, limit: float = 0):
        super().__init__(message)
        self.budget = budget
        self.required = required
        self.limit = limit


class UnsupportedError(OE2DError, ValueError):
    exit_code = 2


class CertificationFailure(OE2DError, RuntimeError):
    """The design solver hit its iteration cap before the termination test fired.

    Usually means the SEC bound S handed to the solver is too small.
    """

    exit_code = 3

    def __init__(self, message: str, last_iterate=None, violating=None, iterations: int = 0, sec_bound: float = 0.0):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.violating = violating
        self.iterations = iterations
        self.sec_bound = sec_bound
