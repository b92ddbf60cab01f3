"""Column-oriented CSV tables for external plotting."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["Table", "format_value", "emit_plotdata", "read_table"]

SIG_DIGITS = 10


def format_value(v) -> str:
    """Fixed-point text with ``SIG_DIGITS`` significant digits; ``None`` is empty."""
    if v is None:
        return ""
    if isinstance(v, (str, np.str_)):
        return str(v)
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    x = float(v)
    if math.isnan(x):
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        return "0"
    text = np.format_float_positional(x, precision=SIG_DIGITS, unique=False, fractional=False, trim="-")
    if math.isinf(float(text)):
        # rounding up past the largest double
        text = np.format_float_positional(x, unique=True, trim="-")
    return text


@dataclass
class Table:
    name: str
    header: list[str]
    rows: list[list] = field(default_factory=list)

    def add(self, *values) -> None:
        if len(values) != len(self.header):
            raise ValueError(f"{self.name}: expected {len(self.header)} values, got {len(values)}")
        self.rows.append(list(values))

    def to_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([format_value(v) for v in row])
        return buf.getvalue()


def emit_plotdata(tables, out_dir) -> list[Path]:
    """Write each table to ``<out_dir>/<name>.csv`` and return the paths.

    Raises ``OSError`` when the directory cannot be created or written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in tables:
        p = out / f"{t.name}.csv"
        with open(p, "w", newline="", encoding="utf-8") as fh:
            fh.write(t.to_text())
        paths.append(p)
    return paths


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: missing header")
    return rows[0], rows[1:]
