"""CSV and plain-text outputs.

Every CSV starts with a ``#`` comment line carrying the config hash and seed,
then a header row.  Floats are written with ``repr`` so they read back
bit-for-bit; infinities appear as the literal ``inf``.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], comment: str) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_columns(path, columns: dict, comment: str) -> Path:
    header = list(columns)
    cols = [np.asarray(c) for c in columns.values()]
    return write_csv(path, header, zip(*cols), comment)


def read_csv(path) -> dict[str, np.ndarray]:
    """Read a CSV written by :func:`write_csv` into float columns (non-numeric kept as str)."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    rows = list(reader)
    out: dict[str, np.ndarray] = {}
    for i, name in enumerate(header):
        vals = [r[i] for r in rows]
        try:
            out[name] = np.array([float(v) for v in vals])
        except ValueError:
            out[name] = np.array(vals)
    return out


def read_alpha(path) -> np.ndarray:
    """Thinning vector from a CSV (``alpha_star`` or ``alpha`` column) or a bare list of numbers."""
    path = Path(path)
    text = path.read_text()
    body = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if body and any(c.isalpha() and c not in "eE" for c in body[0]):
        cols = read_csv(path)
        for name in ("alpha_star", "alpha"):
            if name in cols:
                return cols[name]
        raise ValueError(f"{path} has no alpha or alpha_star column")
    return np.array([float(x) for ln in body for x in ln.replace(",", " ").split()])


def write_summary(path, items: dict, comment: str) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(f"# {comment}\n")
        for k, v in items.items():
            fh.write(f"{k}: {_fmt(v)}\n")
    return path
