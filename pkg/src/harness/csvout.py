"""CSV emission with fixed formatting.

Numbers are written in scientific notation with 6 significant digits and
every line ends in `\\n`, so repeated runs produce identical bytes.
"""
from __future__ import annotations

import csv
import io
import math
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import TextIO

import structlog

from src.solver.field import DGField, to_csv_rows

log = structlog.get_logger()

Cell = int | float | str | None


def fmt(value: Cell) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "-"
        return f"{value:.5e}"
    return str(value)


def render(header: Sequence[str], rows: Iterable[Sequence[Cell]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row {row!r} does not match header {list(header)}")
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def emit(text: str, path: str | Path | None, stream: TextIO) -> None:
    """Write to path when given, otherwise to stream."""
    if path is None:
        stream.write(text)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    log.info("csv_written", path=str(target), rows=text.count("\n") - 1)


def field_csv(f: DGField) -> str:
    """(j, i, ℓ, coeff) dump of a DG field."""
    return render(("j", "i", "l", "coeff"), to_csv_rows(f))
