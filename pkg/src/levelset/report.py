"""Experiment records: verdicts, JSON reports and sweep CSV files."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field

from .errors import UsageError

SCHEMA_VERSION = "1"
CSV_COLUMNS = (
    "lambda",
    "measure",
    "stderr",
    "lambda_p_measure",
    "target",
    "envelope_lo",
    "envelope_hi",
    "pass",
)


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    measured: float
    target: float
    tolerance: float

    def to_dict(self):
        return {
            "name": self.name,
            "pass": bool(self.passed),
            "measured": float(self.measured),
            "target": float(self.target),
            "tolerance": float(self.tolerance),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["name"], bool(d["pass"]), d["measured"], d["target"], d["tolerance"])

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"[{status}] {self.name}: measured={self.measured:.6g} "
            f"target={self.target:.6g} tol={self.tolerance:.3g}"
        )


@dataclass
class Report:
    experiment: str
    inputs: dict
    results: dict
    verdicts: list = field(default_factory=list)
    wall_time_seconds: float = 0.0
    version: str = SCHEMA_VERSION

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "inputs": self.inputs,
            "results": self.results,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "wall_time_seconds": self.wall_time_seconds,
            "version": self.version,
        }

    @classmethod
    def from_dict(cls, d):
        missing = {"experiment", "inputs", "results", "verdicts", "wall_time_seconds", "version"} - set(d)
        if missing:
            raise UsageError(f"report is missing keys: {sorted(missing)}")
        return cls(
            d["experiment"],
            d["inputs"],
            d["results"],
            [Verdict.from_dict(v) for v in d["verdicts"]],
            d["wall_time_seconds"],
            d["version"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Report":
        return cls.from_dict(json.loads(text))

    def sweep_rows(self):
        return self.results.get("sweep", [])


def _num(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.17g}"


def sweep_csv(rows) -> str:
    """CSV text for sweep rows (dicts keyed by CSV_COLUMNS), 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([_num(row.get(c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def read_sweep_csv(text: str):
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != CSV_COLUMNS:
        raise UsageError(f"unexpected CSV header {header}")
    rows = []
    for rec in reader:
        row = {}
        for c, s in zip(CSV_COLUMNS, rec):
            if c == "pass":
                row[c] = None if s == "" else s == "true"
            else:
                row[c] = None if s == "" else float(s)
        rows.append(row)
    return rows


def _atomic_write(path, text):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report: Report, json_path=None, csv_path=None):
    """Write the JSON report and, if it has sweep rows, the CSV; returns paths written."""
    written = []
    if json_path is not None:
        _atomic_write(json_path, report.to_json() + "\n")
        written.append(os.fspath(json_path))
    if csv_path is not None and report.sweep_rows():
        _atomic_write(csv_path, sweep_csv(report.sweep_rows()))
        written.append(os.fspath(csv_path))
    return written
