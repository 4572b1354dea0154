"""Exception hierarchy for trajlab.

Every error the library raises derives from TrajlabError so callers can
catch one base class. The CLI maps subclasses onto its exit-code contract:
2 for configuration/schema problems, 3 for observation-window leakage,
4 for validation or fit failures, 5 for anything unexpected.
"""

from __future__ import annotations


class TrajlabError(Exception):
    """Base class for all trajlab errors."""


# -- configuration / schema (CLI exit 2) -----------------------------------

class ConfigError(TrajlabError):
    """Invalid configuration: bad scenario file, unknown keys, bad values."""


class SchemaError(ConfigError):
    """A tabular input row violates the file schema."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateFeature(ConfigError):
    pass


class InvalidWindow(ConfigError):
    pass


class UnknownCourse(SchemaError):
    def __init__(self, course_id: str, line: int | None = None):
        self.course_id = course_id
        super().__init__(f"unknown course {course_id!r}", line)


class NonMonotoneTerms(SchemaError):
    def __init__(self, student_id: str, detail: str = ""):
        self.student_id = student_id
        msg = f"student {student_id!r}: term sequence not gap-free from 1"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class CycleDetected(ConfigError):
    def __init__(self, cycle: list[str]):
        self.cycle = list(cycle)
        super().__init__("prerequisite cycle: " + " -> ".join(self.cycle))


class UnknownEndpoint(ConfigError):
    def __init__(self, edge: tuple[str, str]):
        self.edge = edge
        super().__init__(f"edge {edge[0]!r} -> {edge[1]!r} references an unregistered course")


class InvalidPolicy(ConfigError):
    pass


class IncompleteDesign(ConfigError):
    pass


class InvalidDistribution(ConfigError):
    pass


class MissingArtifact(ConfigError):
    pass


# -- leakage (CLI exit 3) ---------------------------------------------------

class LeakageViolation(TrajlabError):
    """A model input is not observable at the requested decision point."""

    def __init__(self, violations: list[tuple[str, str]]):
        # violations: (feature name, window description) pairs
        self.violations = list(violations)
        detail = ", ".join(f"{name} [{window}]" for name, window in self.violations)
        super().__init__(f"features not observable at decision point: {detail}")


# -- validation / fit failures (CLI exit 4) ---------------------------------

class ValidationFailure(TrajlabError):
    pass


class TermOutOfRange(ValidationFailure):
    pass


class Unschedulable(ValidationFailure):
    pass


class DegenerateInput(ValidationFailure):
    pass


class SingularSystem(ValidationFailure):
    pass


class InsufficientData(ValidationFailure):
    pass


class ZeroTreatmentVariation(ValidationFailure):
    pass


class HorizonMismatch(ValidationFailure):
    pass


class FingerprintMismatch(ValidationFailure):
    pass
