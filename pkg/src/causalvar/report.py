"""Deterministic JSON, CSV and Markdown reports with atomic writes.

Reports carry no timestamps or host details, so rerunning a command with the
same inputs and seed produces the same bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
FORMATS = ("json", "csv", "md")


@dataclass
class Report:
    """A payload for JSON plus a flat table for CSV and Markdown."""

    command: str
    payload: dict
    header: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (list, tuple)):
        return " ".join(str(v) for v in x)
    return "" if x is None else str(x)


def to_json(report: Report) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": report.command,
        "config": report.config,
        "result": report.payload,
    }
    return json.dumps(_plain(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def to_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["schema_version", SCHEMA_VERSION])
    w.writerow(report.header)
    for row in report.rows:
        w.writerow([_cell(x) for x in row])
    return buf.getvalue()


def to_markdown(report: Report) -> str:
    lines = [f"# {report.command}", ""]
    for key in sorted(report.config):
        lines.append(f"- {key}: {_cell(_plain(report.config[key]))}")
    lines.append(f"- schema_version: {SCHEMA_VERSION}")
    lines.append("")
    if report.header:
        lines.append("| " + " | ".join(str(h) for h in report.header) + " |")
        lines.append("|" + "---|" * len(report.header))
        for row in report.rows:
            lines.append("| " + " | ".join(_cell(x) for x in row) + " |")
    return "\n".join(lines) + "\n"


def render(report: Report, fmt: str) -> str:
    if fmt == "json":
        return to_json(report)
    if fmt == "csv":
        return to_csv(report)
    if fmt == "md":
        return to_markdown(report)
    raise ValueError(f"unknown report format {fmt!r}")


def write_atomic(path: str | Path, text: str) -> None:
    """Write through a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
