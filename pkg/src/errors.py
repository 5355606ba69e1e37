"""Exception types and their command-line exit codes."""

from typing import Any, Optional


class ParabolicCfError(Exception):
    """Base class for all errors raised by the toolkit."""

    exit_code = 1


class UsageError(ParabolicCfError):
    """Invalid command-line usage or configuration values."""

    exit_code = 2


class DomainError(ParabolicCfError, ValueError):
    """An argument lies outside the domain of an operation."""

    exit_code = 3


class CertificationDomainError(DomainError):
    """The monotone sandwich does not justify certified bounds (alpha < 1/6)."""


class ShapeError(ParabolicCfError, ValueError):
    """A vector does not match the dimension of the operator it is fed to."""

    exit_code = 3


class ConvergenceError(ParabolicCfError):
    """An iteration failed to converge within its iteration budget."""

    exit_code = 3

    def __init__(self, message: str, last_iterate: Any = None, last_value: Optional[float] = None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.last_value = last_value


class DegenerateAttractorError(ParabolicCfError):
    """The Galton-Watson iteration drifted toward the Heaviside solution."""

    exit_code = 3

    def __init__(self, message: str, last_iterate: Any = None):
        super().__init__(message)
        self.last_iterate = last_iterate


class UndeterminedCertificationError(ParabolicCfError):
    """Certification could not classify an alpha at the maximal depth."""

    exit_code = 4

    def __init__(self, message: str, certificate: Any = None):
        super().__init__(message)
        self.certificate = certificate


class ResourceLimitError(ParabolicCfError):
    """A request exceeds the configured memory or depth budget."""

    exit_code = 5
