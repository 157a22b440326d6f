"""CSV and JSON serialization of reports.

CSV holds one row per verdict with numbers at 12 significant digits.  JSON
holds the full report; floats keep their shortest round-trip representation
so that parsing the output reproduces every number bit for bit.  Non-finite
floats become ``null`` in JSON and ``nan``/``inf`` in CSV.
"""

from __future__ import annotations

import csv
import io
import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Iterable

import numpy as np

from plaplab.harness import SCHEMA_VERSION, Report

CSV_COLUMNS = (
    "claim", "p", "alpha", "lambda_p", "lambda_2p", "gamma", "lambda_buck",
    "lhs", "rhs", "margin", "outcome", "flags",
)
SIGNIFICANT_DIGITS = 12


def _fmt(x) -> str:
    if x is None:
        return ""
    return format(float(x), f".{SIGNIFICANT_DIGITS}g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating, Fraction)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _cell_flag(report: Report) -> list[str]:
    if report.cell is None:
        return []
    params = ",".join(f"{k}={_fmt(v) if isinstance(v, (int, float)) else v}"
                      for k, v in report.cell["params"].items())
    return [f"cell[{params}]"]


def csv_rows(reports: Iterable[Report]) -> list[list[str]]:
    rows = []
    for report in reports:
        cell = _cell_flag(report)
        for v in report.verdicts:
            e = v.extra
            rows.append([
                v.claim,
                _fmt(e.get("p")),
                _fmt(e.get("alpha")),
                _fmt(e.get("lambda_p")),
                _fmt(e.get("lambda_2p")),
                _fmt(e.get("gamma")),
                _fmt(e.get("lambda_buck")),
                _fmt(v.lhs),
                _fmt(v.rhs),
                _fmt(v.margin),
                v.outcome,
                ";".join(list(v.flags) + cell),
            ])
        if report.cell is not None and not report.verdicts and report.errors:
            rows.append(["cell-error"] + [""] * 9 + ["error", ";".join(cell)])
    return rows


def to_csv(reports: Report | Iterable[Report]) -> str:
    if isinstance(reports, Report):
        reports = [reports]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(csv_rows(reports))
    return buf.getvalue()


def to_json(reports: Report | list[Report], timings: bool = False,
            key: str = "reports") -> str:
    """One report as an object; several under ``key`` (``"cells"`` for sweeps)."""
    if isinstance(reports, Report):
        doc = reports.to_dict(timings=timings)
    else:
        doc = {"schema_version": SCHEMA_VERSION,
               key: [r.to_dict(timings=timings) for r in reports]}
    return json.dumps(_jsonable(doc), indent=2, allow_nan=False) + "\n"


def emit(reports, fmt: str = "json", out: str | Path | None = None,
         timings: bool = False, key: str = "reports") -> str:
    """Serialize ``reports`` and write them to ``out`` (if given).

    Raises:
        OSError: when ``out`` cannot be written; the message names the path.
    """
    if fmt == "csv":
        text = to_csv(reports)
    elif fmt == "json":
        text = to_json(reports, timings=timings, key=key)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if out is not None:
        path = Path(out)
        try:
            path.write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write report to {path}: {exc.strerror or exc}") from exc
    return text
