"""CSV and JSON files used by the command line and the acceptance suite.

CSV: comma separated, one header row, 17 significant digits, LF endings.
JSON: UTF-8, sorted keys, schema version in every report.
"""
from __future__ import annotations

import csv
import json
import platform
from pathlib import Path

import numpy as np

from .errors import DataFormatError

SCHEMA_VERSION = 1
_FMT = "{:.17g}"


def _open_read(path):
    p = Path(path)
    try:
        return p.open("r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataFormatError(f"cannot read {p}: {exc.strerror or exc}") from exc


def read_table(path) -> dict[str, np.ndarray]:
    """Columns of a headed numeric CSV, keyed by header name."""
    with _open_read(path) as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r and any(c.strip() for c in r)]
    if any(len(r) != len(header) for r in body):
        raise DataFormatError(f"{path}: ragged rows (header has {len(header)} columns)")
    try:
        data = np.array([[float(c) for c in r] for r in body], dtype=float).reshape(len(body), len(header))
    except ValueError as exc:
        raise DataFormatError(f"{path}: non-numeric entry ({exc})") from exc
    if not np.all(np.isfinite(data)):
        raise DataFormatError(f"{path}: non-finite entry")
    return {h: data[:, i] for i, h in enumerate(header)}


def read_vector(path, prefer=("value", "x", "knot", "y")) -> np.ndarray:
    """One numeric column: the first preferred header present, else the last column."""
    cols = read_table(path)
    for name in prefer:
        if name in cols:
            return cols[name]
    return list(cols.values())[-1]


def write_table(path, columns: dict) -> None:
    names = list(columns)
    arrays = [np.asarray(columns[k]) for k in names]
    n = len(arrays[0]) if arrays else 0
    if any(len(a) != n for a in arrays):
        raise ValueError("columns of different lengths")
    lines = [",".join(names)]
    for i in range(n):
        cells = []
        for a in arrays:
            v = a[i]
            if isinstance(v, (str, np.str_)):
                cells.append(str(v))
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            else:
                cells.append(_FMT.format(float(v)))
        lines.append(",".join(cells))
    _write_text(path, "\n".join(lines) + "\n")


def _write_text(path, text: str) -> None:
    p = Path(path)
    try:
        if p.parent and not p.parent.exists():
            p.parent.mkdir(parents=True, exist_ok=True)
        with p.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataFormatError(f"cannot write {p}: {exc.strerror or exc}") from exc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def versions() -> dict:
    import scipy

    from . import __version__, kernels

    return {
        "bsplift": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "kernels": kernels.BACKEND,
    }


def report(command: str, config: dict, results: dict, timing: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "versions": versions(),
        "config": config,
        "results": results,
        "timing_s": timing,
    }


def write_json(path, payload: dict) -> None:
    _write_text(path, json.dumps(_jsonable(payload), indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def read_pyramid(path):
    """``(coarse, [details...])`` from a pyramid CSV (level, index, kind, value)."""
    cols = read_table(path)
    # kind is stored as 0 (scaling) / 1 (detail) to keep the file numeric
    for key in ("level", "index", "kind", "value"):
        if key not in cols:
            raise DataFormatError(f"{path}: pyramid CSV lacks column {key!r}")
    lev = cols["level"].astype(int)
    idx = cols["index"].astype(int)
    kind = cols["kind"].astype(int)
    val = cols["value"]
    coarse_mask = kind == 0
    if not coarse_mask.any():
        raise DataFormatError(f"{path}: no scaling coefficients")
    L = int(lev[coarse_mask].min())
    coarse = _gather(idx[coarse_mask & (lev == L)], val[coarse_mask & (lev == L)], path)
    details = []
    for j in sorted(set(lev[kind == 1].tolist())):
        m = (kind == 1) & (lev == j)
        details.append((j, _gather(idx[m], val[m], path)))
    return L, coarse, details


def _gather(idx, val, path):
    out = np.full(idx.size, np.nan)
    if idx.size and (idx.min() < 0 or idx.max() >= idx.size or np.unique(idx).size != idx.size):
        raise DataFormatError(f"{path}: coefficient indices are not 0..n-1")
    out[idx] = val
    return out


def write_pyramid(path, pyramid) -> None:
    levels, index, kind, value = [], [], [], []
    n = pyramid.coarse.shape[0]
    levels += [pyramid.L] * n
    index += list(range(n))
    kind += [0] * n
    value += list(pyramid.coarse)
    for j, d in zip(range(pyramid.L, pyramid.J), pyramid.details):
        levels += [j] * d.shape[0]
        index += list(range(d.shape[0]))
        kind += [1] * d.shape[0]
        value += list(d)
    write_table(
        path,
        {
            "level": np.array(levels, dtype=int),
            "index": np.array(index, dtype=int),
            "kind": np.array(kind, dtype=int),
            "value": np.array(value, dtype=float),
        },
    )
