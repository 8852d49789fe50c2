"""Uniform record for numeric inequality checks across the audit suites."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class AuditCheck:
    """One audited inequality lhs <= rhs (+ tol), with its margin.

    slack = rhs - lhs; the check passes when slack >= -tol.  params carries
    whatever identifies the instance (seed, dimensions, ...), so a failure
    message alone reproduces it.
    """

    name: str
    lhs: float
    rhs: float
    tol: float = 1e-9
    params: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return float(self.rhs) - float(self.lhs)

    @property
    def passed(self) -> bool:
        return bool(self.slack >= -self.tol)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "pass": self.passed,
            "params": dict(self.params),
        }

    def describe(self) -> str:
        status = "pass" if self.passed else "FAIL"
        extra = f" params={self.params}" if self.params else ""
        return f"[{status}] {self.name}: lhs={self.lhs:.6g} rhs={self.rhs:.6g} slack={self.slack:.3g}{extra}"


def all_pass(checks) -> bool:
    return all(c.passed for c in checks)
