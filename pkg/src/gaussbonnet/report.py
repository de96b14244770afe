"""Verification reports with deterministic JSON serialization.

Key order is fixed by construction and floats serialize through Python's
shortest-roundtrip repr, so identical inputs produce byte-identical
documents (wall_time is reported but excluded from determinism claims).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

__all__ = ["Report", "report_to_json", "report_to_csv"]


@dataclass
class Report:
    command: str
    inputs: dict
    resolutions: list = field(default_factory=list)  # (node count, value)
    value: float | None = None
    expected: float | None = None
    abs_error: float | None = None
    tolerance: float | None = None
    passed: bool | None = None
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    def finalize(self):
        if self.expected is not None and self.value is not None:
            self.abs_error = abs(self.value - self.expected)
            if self.tolerance is not None:
                self.passed = bool(self.abs_error < self.tolerance)
        return self


def report_to_json(report, include_wall_time=True, indent=2):
    doc = {
        "command": report.command,
        "inputs": report.inputs,
        "resolutions": [[int(n), v] for n, v in report.resolutions],
        "value": report.value,
        "expected": report.expected,
        "abs_error": report.abs_error,
        "tolerance": report.tolerance,
        "passed": report.passed,
    }
    doc.update(report.extra)
    if include_wall_time:
        doc["wall_time"] = report.wall_time
    return json.dumps(doc, indent=indent, sort_keys=False, allow_nan=True)


def report_to_csv(report):
    lines = ["nodes,value"]
    for n, v in report.resolutions:
        lines.append(f"{n},{v!r}")
    return "\n".join(lines) + "\n"
