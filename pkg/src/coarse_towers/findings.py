"""Typed validation results."""
from dataclasses import dataclass, field
from typing import Any, Optional, Tuple


def _fmt(value: Any, limit: int = 120) -> str:
    if value is None:
        return "(none)"
    text = str(value)
    if len(text) > limit:
        text = text[:limit] + "…"
    return text


@dataclass(frozen=True)
class Violation:
    """A single failed check with the elements that witness it.

    kind is one of: identity, symmetry, positivity, triangle, strong-triangle,
    level, parent, single-germ, childless, orphan, level-preservation,
    monotone, fiber, lower-set, top-image, domain, sequence, inequality,
    distortion, entropy, multiplicativity.
    """
    check: str
    kind: str
    witness: Tuple[str, ...]
    expected: Optional[Any] = None
    actual: Optional[Any] = None

    def describe(self) -> str:
        where = ", ".join(self.witness)
        e, a = _fmt(self.expected), _fmt(self.actual)
        if self.kind == "strong-triangle":
            return f"({where}): d = {a} exceeds max of the other two sides {e}"
        if self.kind == "triangle":
            return f"({where}): d = {a} exceeds the sum of the other two sides {e}"
        if self.kind in ("identity", "symmetry", "positivity"):
            return f"({where}): {self.kind} fails, expected {e}, got {a}"
        if self.kind == "level":
            return f"node {where}: parent level {a}, expected {e}"
        if self.kind == "inequality":
            return f"level {where}: {self.check} fails ({a} vs {e})"
        return f"{self.check} [{self.kind}] at ({where}): expected {e}, got {a}"


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of a validator: the checks that ran and every violation found."""
    subject: str
    checks: Tuple[str, ...]
    violations: Tuple[Violation, ...] = field(default_factory=tuple)
    notes: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def by_check(self, check: str) -> Tuple[Violation, ...]:
        return tuple(v for v in self.violations if v.check == check)

    def passed(self, check: str) -> bool:
        return check in self.checks and not self.by_check(check)
