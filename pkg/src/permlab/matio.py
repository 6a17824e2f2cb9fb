"""Matrix and model I/O: CSV (plain rows of decimals) and JSON.

Floats are written with 17 significant digits so every file round-trips
bit-for-bit.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import ParseError

__all__ = [
    "fmt",
    "read_matrix",
    "write_matrix_csv",
    "write_matrix_json",
    "read_matrix_csv",
    "read_matrix_json",
]


def fmt(x: float) -> str:
    """Format a float with enough digits for an exact round-trip."""
    return format(float(x), ".17g")


def read_matrix_csv(path: str) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            row = []
            for col, tok in enumerate(fields, start=1):
                try:
                    row.append(float(tok))
                except ValueError as exc:
                    raise ParseError(
                        f"{path}: row {lineno}, column {col}: not a number: {tok!r}"
                    ) from exc
            rows.append(row)
    if not rows:
        raise ParseError(f"{path}: empty matrix file")
    width = len(rows[0])
    for lineno, row in enumerate(rows, start=1):
        if len(row) != width:
            raise ParseError(
                f"{path}: row {lineno} has {len(row)} fields, expected {width}"
            )
    return np.asarray(rows, dtype=float)


def write_matrix_csv(path: str, A: np.ndarray) -> None:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    with open(path, "w", encoding="utf-8") as fh:
        for row in A:
            fh.write(",".join(fmt(x) for x in row) + "\n")


def read_matrix_json(path: str) -> np.ndarray:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from exc
    return matrix_from_obj(obj, origin=path)


def matrix_from_obj(obj, origin: str = "<config>") -> np.ndarray:
    if isinstance(obj, list):
        rows = obj
    elif isinstance(obj, dict) and "rows" in obj:
        rows = obj["rows"]
        n = obj.get("n")
        if n is not None and len(rows) != n:
            raise ParseError(f"{origin}: declared n={n} but found {len(rows)} rows")
    else:
        raise ParseError(f"{origin}: expected a list of rows or {{'n', 'rows'}}")
    try:
        A = np.asarray(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{origin}: non-numeric matrix entry: {exc}") from exc
    if A.ndim != 2:
        raise ParseError(f"{origin}: matrix rows have inconsistent lengths")
    return A


def write_matrix_json(path: str, A: np.ndarray) -> None:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    obj = {"n": int(A.shape[0]), "rows": [[float(x) for x in row] for row in A]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True)
        fh.write("\n")


def read_matrix(path: str) -> np.ndarray:
    """Dispatch on extension: .json uses the JSON schema, anything else CSV."""
    if not os.path.exists(path):
        raise ParseError(f"{path}: no such file")
    if path.endswith(".json"):
        return read_matrix_json(path)
    return read_matrix_csv(path)
