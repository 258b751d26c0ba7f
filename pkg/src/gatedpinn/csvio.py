"""CSV writing with round-trip float formatting.

``repr`` of a Python float is the shortest string that parses back to the
same double, which is exactly what every exported table needs.
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_columns(path: Union[str, Path], header: Sequence[str], columns: Sequence[np.ndarray]) -> Path:
    """Write equal-length 1-d columns; faster than per-row formatting for big grids."""
    cols = [np.asarray(c).ravel() for c in columns]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("columns differ in length")
    as_text = []
    for c in cols:
        if c.dtype.kind in "iub":
            as_text.append(c.astype(np.int64).astype(str))
        else:
            as_text.append(np.array([repr(float(v)) for v in c.tolist()], dtype=object))
    return write_csv(path, header, zip(*as_text))


def read_csv(path: Union[str, Path]):
    """(header, rows-as-strings)."""
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]
