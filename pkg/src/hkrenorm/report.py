"""Pass/fail reports shared by every verification routine."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any


@dataclass
class CheckReport:
    name: str
    passed: bool
    detail: dict[str, Any] = field(default_factory=dict)
    counterexample: Any = None

    def __bool__(self) -> bool:
        return self.passed

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = ""
        if self.detail:
            extra = " " + ", ".join(f"{k}={v}" for k, v in self.detail.items() if not isinstance(v, (dict, list)))
        return f"[{status}] {self.name}{extra}"

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "passed": self.passed, "detail": self.detail, "counterexample": self.counterexample}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=str)
