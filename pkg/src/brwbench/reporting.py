"""Machine-readable report rendering.

Reports are plain dicts rendered with sorted keys and no timestamps, so a
rerun from the same resolved config and seed produces byte-identical output.
Fractions are rendered as "p/q" strings next to their float values.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from fractions import Fraction


def jsonable(obj):
    """Recursively convert report values into JSON-safe types."""
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (list, tuple)):
        return [jsonable(x) for x in obj]
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if hasattr(obj, "item") and callable(obj.item) and not isinstance(obj, (str, bytes)):
        return obj.item()  # numpy scalars
    return obj


def stable_json_bytes(obj) -> bytes:
    """Canonical compact JSON encoding, for hashing."""
    return json.dumps(jsonable(obj), sort_keys=True,
                      separators=(",", ":"), ensure_ascii=True).encode("utf-8")


def config_sha256(resolved: dict) -> str:
    return hashlib.sha256(stable_json_bytes(resolved)).hexdigest()


def render_json(report: dict) -> str:
    return json.dumps(jsonable(report), sort_keys=True, indent=2,
                      ensure_ascii=True) + "\n"


def render_csv(fieldnames: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, extrasaction="ignore",
                            lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _csv_cell(row.get(k)) for k in fieldnames})
    return buf.getvalue()


def _csv_cell(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (list, tuple)):
        return "|".join(str(v) for v in value)
    if value is None:
        return ""
    return value
