"""Matrix and results serialization plus config loading.

Matrices travel as RFC-4180 CSV (row-major, '.' decimal, optional header)
or as a JSON envelope {"rows": n, "cols": p, "data": [...]} with the data
flattened row-major. All writers format floats through repr, so identical
inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .types import ConfigError, DimensionMismatch

SCHEMA_VERSION = 1


def matrix_to_csv(path, M, header=None) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if header is not None:
            writer.writerow(header)
        for row in M:
            writer.writerow([repr(float(v)) for v in row])


def matrix_from_csv(path, has_header: bool = False) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if has_header and rows:
        rows = rows[1:]
    rows = [r for r in rows if r]
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    try:
        return np.array([[float(v) for v in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def matrix_to_obj(M) -> dict:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    return {
        "rows": int(M.shape[0]),
        "cols": int(M.shape[1]),
        "data": [float(v) for v in M.ravel()],
    }


def matrix_from_obj(obj) -> np.ndarray:
    try:
        rows, cols, data = obj["rows"], obj["cols"], obj["data"]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed matrix envelope: {exc}") from exc
    arr = np.asarray(data, dtype=np.float64)
    if arr.size != rows * cols:
        raise DimensionMismatch(
            f"envelope declares {rows}x{cols} but carries {arr.size} values"
        )
    return arr.reshape(rows, cols)


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_rows_csv(path, fieldnames, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


# --- config handling -------------------------------------------------------

def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        with open(path) as fh:
            config = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(config, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return config


def apply_overrides(config: dict, overrides) -> dict:
    """Apply dotted-path key=value flag overrides; values parse as JSON if possible."""
    out = json.loads(json.dumps(config))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {key!r} crosses a non-object")
        node[parts[-1]] = value
    return out


def validate_keys(obj: dict, allowed: dict, path: str = "config") -> None:
    """Reject unknown keys recursively; `allowed` maps key -> sub-schema or None."""
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    for key, sub in allowed.items():
        if isinstance(sub, dict) and key in obj:
            if not isinstance(obj[key], dict):
                raise ConfigError(f"{path}.{key}: expected an object")
            validate_keys(obj[key], sub, f"{path}.{key}")


def require(obj: dict, key: str, path: str = "config"):
    if key not in obj:
        raise ConfigError(f"{path}: missing required key {key!r}")
    return obj[key]
