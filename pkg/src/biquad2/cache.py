"""Append-only line cache for class data and fundamental units.

File layout: one header line {"schema": 1}, then one JSON record per line:

    {"v": 1, "m": 399, "h": 8, "h_narrow": 16, "h2": 8,
     "eps": [20, 1, 1], "norm": 1, "period": 2}

A version bump in the header invalidates the whole file.  Appends are
serialized in-process; reads are lock-free and tolerate a torn final line.
"""

from __future__ import annotations

import json
import os
import threading
from typing import Optional, TYPE_CHECKING

if TYPE_CHECKING:
    from .quad import ClassData, FundUnit

SCHEMA_VERSION = 1

_lock = threading.Lock()
_active_path: str | None = None
_records: dict[int, dict] = {}


def install(path: str | None) -> None:
    """Point the process-wide cache at a file (None disables persistence)."""
    global _active_path
    with _lock:
        _active_path = path
        _records.clear()
        if path is None:
            return
        if os.path.exists(path):
            for rec in _read_all(path):
                _records[rec["m"]] = rec
        else:
            os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(json.dumps({"schema": SCHEMA_VERSION}) + "\n")


def _read_all(path: str) -> list[dict]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        try:
            if json.loads(header).get("schema") != SCHEMA_VERSION:
                return []
        except (json.JSONDecodeError, AttributeError):
            return []
        for line in fh:
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                continue  # torn trailing line is treated as absent
            if isinstance(rec, dict) and rec.get("v") == 1 and "m" in rec:
                out.append(rec)
    return out


def cache_put(m: int, record: dict) -> None:
    """Idempotent append of a record for m (newest record wins on read)."""
    with _lock:
        old = _records.get(m)
        if old is not None and all(old.get(k) == v for k, v in record.items() if k != "v"):
            return
        rec = {"v": 1, "m": m, **{k: v for k, v in record.items() if k != "m"}}
        _records[m] = rec
        if _active_path is not None:
            with open(_active_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def cache_get(m: int) -> Optional[dict]:
    with _lock:
        return _records.get(m)


def lookup_class_data(m: int) -> Optional["ClassData"]:
    rec = cache_get(m)
    if rec is None or "h" not in rec:
        return None
    from .quad import ClassData

    return ClassData(m=m, h=rec["h"], h_narrow=rec["h_narrow"], h2=rec["h2"])


def store_class_data(data: "ClassData", unit: "FundUnit") -> None:
    cache_put(
        data.m,
        {
            "h": data.h,
            "h_narrow": data.h_narrow,
            "h2": data.h2,
            "eps": [unit.value.a, unit.value.b, unit.value.den],
            "norm": unit.norm,
            "period": unit.cf_period,
        },
    )
