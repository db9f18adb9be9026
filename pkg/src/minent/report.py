"""Pass/fail reports produced by the verifiers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float
    # "le": value <= threshold passes; "ge": value >= threshold passes
    kind: str = "le"

    @property
    def passed(self) -> bool:
        if self.kind == "le":
            return self.value <= self.threshold
        return self.value >= self.threshold

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "value": self.value,
            "threshold": self.threshold,
            "kind": self.kind,
            "passed": self.passed,
        }


@dataclass
class VerificationReport:
    """Ordered collection of named checks plus free-form extras."""

    subject: str
    checks: list[Check] = field(default_factory=list)
    extras: dict[str, Any] = field(default_factory=dict)

    def add(self, name: str, value: float, threshold: float, kind: str = "le") -> Check:
        c = Check(name, float(value), float(threshold), kind)
        self.checks.append(c)
        return c

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict[str, Any]:
        return {
            "subject": self.subject,
            "pass": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            **self.extras,
        }
