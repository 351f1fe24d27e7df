"""Text formats for point sets, weight tables and run reports.

Point files hold one point per line with whitespace- or comma-separated
decimal fields and an optional ``# dim=N`` header. Weight files are either
a dense ``N_U x N_V`` matrix or sparse ``i k m`` triplet lines (0-based);
the layout is detected from the shape unless a ``# format=dense`` or
``# format=sparse`` header says otherwise.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .stats import PairTable

_SPLIT = re.compile(r"[,\s]+")
_HEADER = re.compile(r"#\s*(\w+)\s*=\s*(\S+)")


class ParseError(ValueError):
    pass


def _read_rows(path) -> tuple[list[list[float]], dict[str, str]]:
    rows, headers = [], {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for key, val in _HEADER.findall(line):
                    headers[key.lower()] = val
                continue
            try:
                # float() ignores the process locale
                rows.append([float(tok) for tok in _SPLIT.split(line) if tok])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    return rows, headers


def read_points(path) -> np.ndarray:
    rows, headers = _read_rows(path)
    if not rows:
        raise ParseError(f"{path}: no points")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ParseError(f"{path}: rows have differing field counts {sorted(widths)}")
    pts = np.array(rows)
    if "dim" in headers and int(headers["dim"]) != pts.shape[1]:
        raise ParseError(f"{path}: header says dim={headers['dim']} but rows have {pts.shape[1]} fields")
    if not np.all(np.isfinite(pts)):
        raise ParseError(f"{path}: non-finite coordinate")
    return pts


def _fmt(x: float) -> str:
    return repr(float(x))


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_points(path, points) -> None:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lines = [f"# dim={pts.shape[1]}"] + [" ".join(_fmt(x) for x in row) for row in pts]
    _atomic_write(path, "\n".join(lines) + "\n")


def read_weights(path, n_u: int, n_v: int) -> PairTable:
    rows, headers = _read_rows(path)
    if not rows:
        raise ParseError(f"{path}: no weights")
    fmt = headers.get("format")
    dense_shape = len(rows) == n_u and all(len(r) == n_v for r in rows)
    triplets = all(len(r) == 3 and r[0].is_integer() and r[1].is_integer() for r in rows)
    if fmt is None:
        fmt = "dense" if dense_shape else "sparse" if triplets else None
    if fmt == "dense":
        if not dense_shape:
            raise ParseError(f"{path}: dense weights must be {n_u} rows x {n_v} columns")
        table = PairTable.from_dense(np.array(rows))
    elif fmt == "sparse":
        if not triplets:
            raise ParseError(f"{path}: sparse weights need 'i k m' lines with integer indices")
        table = PairTable.from_triplets((int(i), int(k), m) for i, k, m in rows)
    else:
        raise ParseError(f"{path}: cannot tell dense from sparse layout (shape does not fit either)")
    try:
        table.check_bounds(n_u, n_v)
    except IndexError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return table


def write_weights(path, table: PairTable) -> None:
    lines = ["# format=sparse"]
    lines += [f"{i} {k} {_fmt(w)}" for i, k, w in zip(table.i.tolist(), table.k.tolist(), table.weights.tolist())]
    _atomic_write(path, "\n".join(lines) + "\n")


def write_json(path, obj) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=False) + "\n")


def write_columns(path, header: list[str], rows) -> None:
    """Comma-delimited columns for external plotting tools."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) if isinstance(x, float) else x for x in row])


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


_TRANSFORM = {
    "type": "object",
    "required": ["rotation", "translation", "scale", "mode"],
    "properties": {
        "rotation": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "translation": {"type": "array", "items": {"type": "number"}},
        "scale": {"type": "number", "exclusiveMinimum": 0},
        "mode": {"enum": ["rigid", "similarity"]},
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["command", "config", "inputs", "timings_ms", "transform", "e_min", "converged", "iterations", "pairs"],
    "properties": {
        "command": {"enum": ["align", "register", "score"]},
        "config": {"type": "object"},
        "inputs": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["path", "sha256"],
                "properties": {"path": {"type": "string"}, "sha256": {"type": "string"}},
            },
        },
        "timings_ms": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
        "transform": _TRANSFORM,
        "e_min": {"type": "number", "minimum": 0},
        "converged": {"type": ["boolean", "null"]},
        "termination": {"enum": ["PairCountReached", "ThresholdExhausted", "IterationCap", None]},
        "iterations": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["iteration", "threshold_used", "pairs_before", "pairs_after", "transform", "e_min", "pruned"],
                "properties": {"transform": _TRANSFORM},
            },
        },
        "pairs": {
            "type": "array",
            "items": {"type": "array", "prefixItems": [{"type": "integer"}, {"type": "integer"}, {"type": "number"}]},
        },
    },
}
