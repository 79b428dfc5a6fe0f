"""Check records, run reports, and deterministic artifact writers.

All JSON output goes through `write_json` (sorted keys, fixed separators)
and all CSV through `write_csv` (fixed header, '.' decimal, ',' separator,
shortest round-trip float repr), so identical data always produces
byte-identical files.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def jsonify(obj):
    """Recursively convert numpy scalars/arrays so json can serialize them."""
    if isinstance(obj, dict):
        return {str(k): jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def write_json(path, payload) -> None:
    Path(path).write_text(
        json.dumps(jsonify(payload), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_cell(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass
class CheckRecord:
    """One named check with its measured value and tolerance."""

    name: str
    passed: bool
    measured: float | None = None
    tolerance: float | None = None

    def as_dict(self) -> dict:
        return {"check": self.name, "pass": bool(self.passed),
                "measured": self.measured, "tolerance": self.tolerance}


@dataclass
class RunReport:
    """Outcome of one CLI command: config echo, checks, artifacts, timing."""

    command: str
    config: dict = field(default_factory=dict)
    checks: list[CheckRecord] = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    started: float = field(default_factory=time.perf_counter)
    wall_clock: float = 0.0

    def add(self, name: str, passed: bool, measured=None, tolerance=None) -> bool:
        self.checks.append(CheckRecord(name, bool(passed),
                                       None if measured is None else float(measured),
                                       None if tolerance is None else float(tolerance)))
        return bool(passed)

    def finish(self) -> "RunReport":
        self.wall_clock = time.perf_counter() - self.started
        return self

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "config": jsonify(self.config),
            "checks": [c.as_dict() for c in self.checks],
            "artifacts": jsonify(self.artifacts),
            "pass": self.passed,
            "wall_clock": round(self.wall_clock, 6),
        }
