"""Exception hierarchy shared by the services and the command line.

Every error carries the process exit code the CLI reports for it:
2 for bad input, 3 for numerical failure.
"""
from typing import Any, Dict, Optional


class MorphoGridError(Exception):
    exit_code = 3

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def __str__(self) -> str:
        if not self.details:
            return self.message
        extra = ", ".join(f"{key}={value}" for key, value in self.details.items())
        return f"{self.message} ({extra})"


class InputError(MorphoGridError):
    exit_code = 2


class ParseError(InputError):
    def __init__(self, message: str, line: Optional[int] = None, row: Optional[int] = None):
        details = {}
        if line is not None:
            details["line"] = line
        if row is not None:
            details["row"] = row
        super().__init__(message, details)
        self.line = line
        self.row = row


class SchemaMismatchError(InputError):
    pass


class HomologyError(InputError):
    pass


class InsufficientLandmarksError(InputError):
    def __init__(self, message: str, required: int, available: int):
        super().__init__(message, {"required": required, "available": available})
        self.required = required
        self.available = available


class UnknownGroupError(InputError):
    pass


class BaselineRangeError(InputError):
    pass


class NumericalError(MorphoGridError):
    exit_code = 3


class DegenerateConfigurationError(NumericalError):
    pass


class DegenerateBaselineError(NumericalError):
    pass


class CollinearTemplateError(NumericalError):
    pass


class CoincidentLandmarksError(NumericalError):
    pass


class SingularSystemError(NumericalError):
    pass


class RankDeficiencyError(NumericalError):
    pass


class NonConvergenceError(NumericalError):
    def __init__(self, message: str, iterations: int):
        super().__init__(message, {"iterations": iterations})
        self.iterations = iterations


class OutsideDomainError(NumericalError):
    pass


class NonConvexQuadError(NumericalError):
    pass


class DegenerateQuadError(NumericalError):
    pass


class VanishingLineError(NumericalError):
    pass


class ZeroLengthSegmentError(NumericalError):
    def __init__(self, message: str, pair):
        super().__init__(message, {"pair": pair})
        self.pair = pair


class DegeneratePolygonError(NumericalError):
    pass


class DegenerateViewportError(NumericalError):
    pass


class RegistrationMismatchError(NumericalError):
    pass
