"""Deterministic CSV / JSON / text-matrix writers with all-or-nothing commits."""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    """17 significant digits: round-trips every double."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def matrix_text(M, name: str = "") -> str:
    """Row-major dump: a ``# name rows cols`` header then one row per line."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    head = f"# {name} {M.shape[0]} {M.shape[1]}".replace("#  ", "# ")
    body = "\n".join(" ".join(fmt(v) for v in row) for row in M)
    return head + "\n" + body + "\n"


def read_matrix_text(text: str) -> np.ndarray:
    rows = [line.split() for line in text.splitlines() if line.strip() and not line.startswith("#")]
    return np.array([[float(v) for v in row] for row in rows])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def commit_files(out_dir, files: dict) -> list:
    """Write ``{name: text}`` into ``out_dir`` via temp files and renames.

    Nothing is renamed into place until every temp file has been written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=out)
            staged.append((tmp, out / name))
            with os.fdopen(fd, "w", newline="\n") as fh:
                fh.write(text)
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, dest in staged:
        os.replace(tmp, dest)
    return [dest for _, dest in staged]
