"""Serialising reports to CSV and JSON.

A report is a plain dict with ``kind``, ``summary`` (a mapping) and a table
given by ``columns`` and ``rows`` (a list of mappings).  JSON output is
the whole dict plus ``schema_version``; CSV output is the table alone.
Rationals become ``{"fraction": "p/q", "value": float}`` in JSON and a
``name`` / ``name_float`` column pair in CSV.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
import json
import math
import sys
from fractions import Fraction

import numpy as np

SCHEMA_VERSION = "1.0"


def make_report(kind: str, summary: dict, columns=(), rows=()) -> dict:
    return {"kind": kind, "summary": dict(summary), "columns": list(columns), "rows": [dict(r) for r in rows]}


def to_jsonable(obj):
    if isinstance(obj, Fraction):
        return {"fraction": f"{obj.numerator}/{obj.denominator}", "value": float(obj)}
    if isinstance(obj, bool) or obj is None or isinstance(obj, (str, int)):
        return obj
    if isinstance(obj, float):
        if math.isfinite(obj):
            return obj
        return repr(obj)
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, np.generic):
        return to_jsonable(obj.item())
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"real": obj.real.tolist(), "imag": obj.imag.tolist()}
        return obj.tolist()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def from_jsonable(obj):
    """Inverse of :func:`to_jsonable` for the types reports use (rationals come back as ``Fraction``)."""
    if isinstance(obj, dict):
        if set(obj) == {"fraction", "value"}:
            return Fraction(obj["fraction"])
        return {k: from_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [from_jsonable(v) for v in obj]
    return obj


def dumps_json(report: dict) -> str:
    payload = {"schema_version": SCHEMA_VERSION, **to_jsonable(report)}
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"


def loads_json(text: str) -> dict:
    data = json.loads(text)
    data.pop("schema_version", None)
    return from_jsonable(data)


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, np.generic):
        return _csv_cell(value.item())
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, (list, tuple)):
        return ";".join(_csv_cell(v) for v in value)
    return str(value)


def _expand_columns(columns, rows):
    fraction_cols = {c for c in columns if any(isinstance(r.get(c), Fraction) for r in rows)}
    header = []
    for c in columns:
        header.append(c)
        if c in fraction_cols:
            header.append(f"{c}_float")
    return header, fraction_cols


def dumps_csv(report: dict) -> str:
    columns = report.get("columns") or (list(report["rows"][0]) if report.get("rows") else [])
    rows = report.get("rows", [])
    header, fraction_cols = _expand_columns(columns, rows)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(header)
    for row in rows:
        cells = []
        for c in columns:
            v = row.get(c)
            if c in fraction_cols:
                cells.append("" if v is None else f"{Fraction(v).numerator}/{Fraction(v).denominator}")
                cells.append("" if v is None else repr(float(v)))
            else:
                cells.append(_csv_cell(v))
        writer.writerow(cells)
    return buf.getvalue()


def emit(report: dict, fmt: str = "json", path=None) -> None:
    """Write ``report`` as ``fmt`` to ``path`` (standard output when ``path`` is ``None`` or ``"-"``)."""
    if fmt == "json":
        text = dumps_json(report)
    elif fmt == "csv":
        text = dumps_csv(report)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)
