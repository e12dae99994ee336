"""
Exception hierarchy for the NLS-GI engine
Each error carries the process exit code the CLI reports for it
"""

from typing import Any, Optional


class NLSGIError(Exception):
    """Base error; exit code 3 unless a subclass says otherwise"""

    exit_code = 3

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.details = details


class ConfigError(NLSGIError):
    """Bad run config (unknown key, bad value, missing file)"""

    exit_code = 1

    def __init__(self, message: str, line: Optional[int] = None, **details: Any):
        super().__init__(message, line=line, **details)
        self.line = line


class InputError(NLSGIError):
    """Unreadable or malformed input data, bad grids, bad archives"""

    exit_code = 1


class SolitonGateError(NLSGIError):
    """a(z) is too small or winds around zero: eigenvalues or resonances suspected"""

    exit_code = 2

    def __init__(self, message: str, min_abs_a: float, zero_count: int, **details: Any):
        super().__init__(message, min_abs_a=min_abs_a, zero_count=zero_count, **details)
        self.min_abs_a = min_abs_a
        self.zero_count = zero_count


class NumericalError(NLSGIError):
    exit_code = 3


class ConvergenceError(NumericalError):
    pass


class StepSizeError(NumericalError):
    pass


class InstabilityError(NumericalError):
    pass


class DataCorruptionError(NumericalError):
    """Scattering data violates an identity it must satisfy"""
