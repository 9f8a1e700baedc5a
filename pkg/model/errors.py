"""
Exceptions shared by the model, inference and lab packages
"""
from dataclasses import dataclass, field
from typing import List


class InferenceError(Exception):
    """Base class for every error raised by this project."""


class StateIndexError(InferenceError, IndexError):
    """A state value or flat index is outside its cardinality range."""


class StructuralError(InferenceError):
    """Malformed graph structure: cycles, dangling edges, degenerate exponents."""


class OracleSizeError(InferenceError):
    """The joint state space is larger than the configured oracle cap."""


class UsageError(InferenceError):
    """An operation was called with arguments outside its contract."""


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str


@dataclass
class ValidationReport:
    """Report-style validation result; empty means valid."""

    violations: List[Violation] = field(default_factory=list)

    def add(self, kind: str, message: str):
        self.violations.append(Violation(kind, message))

    def extend(self, other: "ValidationReport"):
        self.violations.extend(other.violations)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> List[str]:
        return [v.kind for v in self.violations]

    def __len__(self):
        return len(self.violations)

    def __str__(self):
        if self.ok:
            return "valid"
        return "\n".join(f"[{v.kind}] {v.message}" for v in self.violations)
