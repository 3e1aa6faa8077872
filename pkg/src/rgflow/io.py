"""Deterministic CSV/JSON output stamped with the config hash."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os

from .config import RunConfig, config_json


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(config_json(cfg).encode()).hexdigest()[:16]


def fmt_float(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def write_csv(path, columns, rows, chash: str) -> str:
    """First line '# config_hash=<hash>', then a header and one line per row dict."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash={chash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt_float(r[c]) if not isinstance(r[c], str) else r[c] for c in columns])
    return str(path)


def read_csv(path) -> tuple:
    """(config hash or None, columns, rows as dicts of strings)."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    chash = None
    if lines and lines[0].startswith("# config_hash="):
        chash = lines[0].split("=", 1)[1]
        lines = lines[1:]
    if not lines:
        return chash, [], []
    reader = csv.reader(lines)
    cols = next(reader)
    return chash, cols, [dict(zip(cols, r)) for r in reader]


def _jsonable(obj):
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return fmt_float(obj)
        return float(fmt_float(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(path, payload: dict, chash: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    body = {"config_hash": chash, **_jsonable(payload)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return str(path)


def write_text(path, text: str, chash: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# config_hash={chash}\n{text}")
        if not text.endswith("\n"):
            fh.write("\n")
    return str(path)
