"""Uniform result type for validators and runtime certificates."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Report:
    """Outcome of a validation or certificate check.

    ``violations`` holds one human-readable line per failed clause.  A
    report may be marked inapplicable (its hypotheses were not met), in
    which case no clause was actually checked and ``passed`` stays true.
    """

    name: str
    violations: list[str] = field(default_factory=list)
    applicable: bool = True
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    def fail(self, message: str) -> None:
        self.violations.append(message)

    def summary(self) -> str:
        if not self.applicable:
            return f"{self.name}: skipped ({self.info.get('reason', 'not applicable')})"
        if self.passed:
            return f"{self.name}: ok"
        head = self.violations[0]
        more = f" (+{len(self.violations) - 1} more)" if len(self.violations) > 1 else ""
        return f"{self.name}: {head}{more}"


def fmt_float(value) -> str:
    """Shortest round-trip decimal form, identical across runs."""
    return repr(float(value))
