"""Result tables with unit-labelled columns and deterministic text bodies.

CSV: metadata lines start with '#', then one header row ``name [unit]`` and
the data rows.  JSON: ``{"meta": ..., "columns": ..., "rows": ...}``.  Only
the metadata (wall time) varies between identical runs.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .. import __version__


def format_number(value, precision: int = 12) -> str:
    """Positional decimal with ``precision`` significant digits; nan/inf spelled out, None empty."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v == 0.0:
        return "0"
    return np.format_float_positional(v, precision=precision, unique=False, fractional=False, trim="-")


def _json_value(value, precision: int):
    if isinstance(value, str) or value is None:
        return value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    v = float(value)
    if not math.isfinite(v):
        return None
    return float(f"{v:.{precision}g}")


@dataclass
class ResultTable:
    """Columns as (name, unit) pairs; every row has one entry per column."""

    columns: list
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    precision: int = 12

    def __post_init__(self):
        self.columns = [tuple(c) if not isinstance(c, str) else (c, "") for c in self.columns]

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} entries, table has {len(self.columns)} columns")
        self.rows.append(list(values))

    def header(self) -> list:
        return [f"{n} [{u}]" if u else n for n, u in self.columns]

    def column(self, name: str) -> list:
        k = [n for n, _ in self.columns].index(name)
        return [r[k] for r in self.rows]

    def body_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for row in self.rows:
            w.writerow([format_number(v, self.precision) for v in row])
        return buf.getvalue()

    def meta_lines(self) -> list:
        meta = {"slowqubits": __version__, **self.meta}
        return [f"# {k}: {meta[k]}" for k in meta]

    def to_csv(self) -> str:
        return "\n".join(self.meta_lines()) + "\n" + self.body_csv()

    def to_json(self) -> str:
        meta = json.dumps({"slowqubits": __version__, **self.meta})
        cols = json.dumps([{"name": n, "unit": u} for n, u in self.columns])
        rows = ",\n  ".join(json.dumps([_json_value(v, self.precision) for v in r]) for r in self.rows)
        return f'{{\n "meta": {meta},\n "columns": {cols},\n "rows": [\n  {rows}\n ]\n}}\n'

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        raise ValueError(f"unknown output format {fmt!r}")


def summary_table(values: dict, units: dict | None = None, meta: dict | None = None,
                  precision: int = 12) -> ResultTable:
    """Key/value results as a three-column table (quantity, unit, value)."""
    units = units or {}
    t = ResultTable([("quantity", ""), ("unit", ""), ("value", "")], meta=dict(meta or {}),
                    precision=precision)
    for k, v in values.items():
        t.add(k, units.get(k, ""), v)
    return t


def strip_meta(text: str) -> str:
    """CSV body without '#' lines, or JSON without the meta block (for determinism checks)."""
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        doc.pop("meta", None)
        return json.dumps(doc, sort_keys=True)
    return "".join(line + "\n" for line in text.splitlines() if not line.startswith("#"))
