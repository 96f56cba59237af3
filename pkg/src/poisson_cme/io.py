"""Formatting and small file helpers shared by the CLI and serialisers."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

__all__ = ["fmt", "write_csv", "rows_to_csv", "read_json_arg", "write_text"]


def fmt(value) -> str:
    """15 significant digits in lowercase scientific notation; integers,
    booleans and strings pass through unchanged."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.14e}"
    return str(value)


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_text(text: str, path: str | None) -> None:
    if path is None:
        import sys

        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def write_csv(header, rows, path: str | None) -> None:
    write_text(rows_to_csv(header, rows), path)


def read_json_arg(arg: str):
    """Parse an argument that is either inline JSON or a path to a JSON file."""
    text = arg.strip()
    if not text.startswith(("{", "[")):
        text = Path(arg).read_text()
    return json.loads(text)
