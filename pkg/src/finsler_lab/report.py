"""Check records and JSON/text report serialization."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    UNKNOWN = "unknown"
    ERROR = "error"

    def __str__(self):
        return self.value


@dataclass
class Check:
    """Outcome of one residual test.  ``anchor`` names the identity being
    checked, or ``"plumbing"`` for infrastructure checks."""

    name: str
    residual: float
    tol: float
    anchor: str = "plumbing"
    points: int = 0
    mean_residual: float | None = None
    verdict: Verdict | None = None
    note: str = ""

    def __post_init__(self):
        if not self.anchor:
            raise ValueError("check anchor must be nonempty")
        if self.verdict is None:
            ok = math.isfinite(self.residual) and self.residual <= self.tol
            self.verdict = Verdict.PASS if ok else Verdict.FAIL

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS

    def expect_fail(self, note: str = "") -> "Check":
        """Negative control: the check passes exactly when this one failed."""
        ok = self.verdict is Verdict.FAIL
        return Check(self.name, self.residual, self.tol, self.anchor, self.points, self.mean_residual,
                     Verdict.PASS if ok else Verdict.FAIL, note or "negative control: residual must exceed tol")

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "anchor": self.anchor,
            "verdict": str(self.verdict),
            "max_residual": _num(self.residual),
            "tolerance": _num(self.tol),
            "points": self.points,
        }
        if self.mean_residual is not None:
            d["mean_residual"] = _num(self.mean_residual)
        if self.note:
            d["note"] = self.note
        return d

    def line(self) -> str:
        return (f"[{str(self.verdict).upper():4}] {self.name}: residual {self.residual:.3e}"
                f" (tol {self.tol:.1e}, {self.points} pts){' - ' + self.note if self.note else ''}")


def _num(v: float):
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(f"{v:.6e}")


@dataclass
class Report:
    tool_version: str
    spec_hash: str
    command: str
    checks: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    timings: dict | None = None

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        d = {
            "tool_version": self.tool_version,
            "spec_hash": self.spec_hash,
            "command": self.command,
            "checks": [c.to_dict() for c in self.checks],
            "summary": {
                "total": len(self.checks),
                "passed": sum(c.passed for c in self.checks),
                "failed": sum(not c.passed for c in self.checks),
            },
        }
        if self.data:
            d["data"] = self.data
        if self.timings is not None:
            d["timings"] = {k: round(v, 3) for k, v in self.timings.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        out = [f"finsler-lab {self.tool_version} {self.command} (spec {self.spec_hash[:12]})"]
        out += [c.line() for c in self.checks]
        if self.data:
            out.append(json.dumps(self.data, indent=2, sort_keys=True))
        s = self.to_dict()["summary"]
        out.append(f"{s['passed']}/{s['total']} checks passed")
        return "\n".join(out) + "\n"
