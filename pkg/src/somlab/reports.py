"""CSV tables with a fixed numeric rendering.

Reals are written with 12 significant digits and integers verbatim, so
re-running a seeded experiment reproduces the files byte for byte.
"""

import csv
import io
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

__all__ = ["format_value", "write_table", "table_text"]


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.12g}"
    return str(v)


def table_text(columns: Sequence[str], rows: Iterable, comment: Optional[str] = None) -> str:
    """Render rows (mappings or sequences) as CSV text."""
    buf = io.StringIO()
    if comment:
        for line in comment.strip().splitlines():
            buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if isinstance(row, Mapping):
            row = [row[c] for c in columns]
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_table(path, columns: Sequence[str], rows: Iterable, comment: Optional[str] = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(table_text(columns, rows, comment))
