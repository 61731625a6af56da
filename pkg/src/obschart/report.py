"""Analysis reports: sorted-key JSON documents plus per-arc CSV traces."""

from __future__ import annotations

import csv
import json
import os
import re
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

from .errors import JobError

TRACE_COLUMNS = ("t", "chart_delta_magnitude", "kl_value", "expectation_method", "error_estimate")
STRUCTURED = "structured"
CSV_TRACES = "csv_traces"


@dataclass(frozen=True)
class AnalysisReport:
    """Everything a job produced, as plain JSON-compatible values.

    Orders are integers or the strings ``"INFINITE"`` / ``"UNDETERMINED"``.
    """

    tool_version: str
    job: dict
    chart: dict
    chart_values: dict
    jacobian: dict
    fisher: dict
    hidden_directions: dict
    completeness: dict
    theorem_checks: list
    build_trace: Optional[dict]
    warnings: list
    notes: list = field(default_factory=list)
    timings: Optional[dict] = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisReport":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown report fields {sorted(unknown)}")
        return cls(**{k: d[k] for k in names if k in d})

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"

    @classmethod
    def loads(cls, text: str) -> "AnalysisReport":
        return cls.from_dict(json.loads(text))

    def check(self, arc_id: str) -> dict:
        for c in self.theorem_checks:
            if c["arc_id"] == arc_id:
                return c
        raise KeyError(arc_id)

    def verdicts(self) -> dict:
        """``arc id -> (observable order, KL order)``."""
        return {
            c["arc_id"]: (c["observable_order"]["order"], c["kl_order"]["order"]) for c in self.theorem_checks
        }


def parse_report(text: str) -> AnalysisReport:
    return AnalysisReport.loads(text)


def trace_filename(arc_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", arc_id) + ".csv"


def write_trace_csv(rows, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in rows:
            w.writerow([repr(float(r["t"])), repr(float(r["chart_delta_magnitude"])), repr(float(r["kl_value"])),
                        r["expectation_method"], repr(float(r["error_estimate"]))])


def emit_report(report: AnalysisReport, format: str = STRUCTURED, dest: Optional[str] = None) -> list[str]:
    """Write the report (``structured``: one JSON file) or its traces
    (``csv_traces``: one CSV per arc into directory ``dest``).  Returns written paths."""
    if dest is None:
        raise JobError("emit_report needs a destination path")
    try:
        if format == STRUCTURED:
            parent = os.path.dirname(os.path.abspath(dest))
            os.makedirs(parent, exist_ok=True)
            with open(dest, "w", newline="\n", encoding="utf-8") as fh:
                fh.write(report.dumps())
            return [dest]
        if format == CSV_TRACES:
            os.makedirs(dest, exist_ok=True)
            written, seen = [], set()
            for c in report.theorem_checks:
                name = trace_filename(c["arc_id"])
                if name in seen:
                    raise JobError(f"arc ids collide after sanitizing: {name}")
                seen.add(name)
                path = os.path.join(dest, name)
                write_trace_csv(c["trace"], path)
                written.append(path)
            return written
    except OSError as exc:
        raise JobError(f"cannot write {exc.filename or dest}: {exc.strerror or exc}") from None
    raise ValueError(f"unknown report format '{format}'")
