"""JSON-lines persistence for tuning traces.

One object per line::

    {"iter": 0, "config": {"n": 2, "s": 3, "t": 5}, "epoch_time_s": 12.5,
     "best_so_far_s": 12.5, "phase": "search", "wall_clock": "2024-01-01T00:00:00+00:00"}

A failed evaluation has ``"epoch_time_s": null`` (and ``best_so_far_s`` stays
null until the first success).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Optional

from .config_space import Configuration
from .tuners import ObservationTrace, TraceEntry

FIELDS = ("iter", "config", "epoch_time_s", "best_so_far_s", "phase", "wall_clock")


class TraceFormatError(ValueError):
    def __init__(self, lineno: int, reason: str):
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    config: Configuration
    epoch_time_s: Optional[float]
    best_so_far_s: Optional[float]
    phase: str
    wall_clock: str

    @classmethod
    def from_entry(cls, entry: TraceEntry, wall_clock: Optional[str] = None) -> "TraceRecord":
        return cls(entry.iteration, entry.config, _finite_or_none(entry.epoch_time),
                   _finite_or_none(entry.best_so_far), entry.phase, wall_clock or now_iso())

    def to_json(self) -> str:
        n, s, t = self.config.as_tuple()
        return json.dumps({
            "iter": self.iter,
            "config": {"n": n, "s": s, "t": t},
            "epoch_time_s": self.epoch_time_s,
            "best_so_far_s": self.best_so_far_s,
            "phase": self.phase,
            "wall_clock": self.wall_clock,
        })


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def _finite_or_none(value: float) -> Optional[float]:
    return float(value) if math.isfinite(value) else None


def records_from_trace(trace: ObservationTrace) -> list[TraceRecord]:
    return [TraceRecord.from_entry(e) for e in trace]


def write_trace(records: Iterable[TraceRecord], path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def _number(value, lineno: int, key: str, nullable: bool) -> Optional[float]:
    if value is None and nullable:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TraceFormatError(lineno, f"{key} must be a number{' or null' if nullable else ''}")
    return float(value)


def parse_line(line: str, lineno: int) -> TraceRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise TraceFormatError(lineno, f"invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise TraceFormatError(lineno, "expected a JSON object")
    missing = [k for k in FIELDS if k not in obj]
    if missing:
        raise TraceFormatError(lineno, f"missing field(s) {', '.join(missing)}")
    cfg = obj["config"]
    if not isinstance(cfg, dict) or any(not isinstance(cfg.get(k), int) or isinstance(cfg.get(k), bool)
                                        for k in "nst"):
        raise TraceFormatError(lineno, "config must hold integer n, s, t")
    if not isinstance(obj["iter"], int) or isinstance(obj["iter"], bool):
        raise TraceFormatError(lineno, "iter must be an integer")
    if not isinstance(obj["phase"], str) or not isinstance(obj["wall_clock"], str):
        raise TraceFormatError(lineno, "phase and wall_clock must be strings")
    return TraceRecord(obj["iter"], Configuration(cfg["n"], cfg["s"], cfg["t"]),
                       _number(obj["epoch_time_s"], lineno, "epoch_time_s", True),
                       _number(obj["best_so_far_s"], lineno, "best_so_far_s", True),
                       obj["phase"], obj["wall_clock"])


def read_trace(path) -> list[TraceRecord]:
    """Parse a trace file; blank lines are skipped, anything else malformed raises."""
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                records.append(parse_line(line, lineno))
    return records


def strip_timestamps(text: str) -> str:
    """Trace text with every ``wall_clock`` blanked, for run-to-run comparison."""
    out = []
    for line in text.splitlines():
        if line.strip():
            obj = json.loads(line)
            obj["wall_clock"] = ""
            line = json.dumps(obj)
        out.append(line)
    return "\n".join(out)
