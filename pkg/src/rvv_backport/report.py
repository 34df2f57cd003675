from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple


class Diagnostic(NamedTuple):
    line: int
    code: str
    message: str


class ScratchUse(NamedTuple):
    line: int
    register: str


@dataclass
class TranslationReport:
    source_name: str
    rule_counts: dict[str, int] = field(default_factory=dict)
    warnings: list[Diagnostic] = field(default_factory=list)
    errors: list[Diagnostic] = field(default_factory=list)
    scratch_uses: list[ScratchUse] = field(default_factory=list)

    @property
    def status(self) -> str:
        return "failed" if self.errors else "ok"

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def rules_fired(self) -> int:
        return sum(self.rule_counts.values())
