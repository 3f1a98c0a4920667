"""Canonical report serialization.

JSON output is fully deterministic: keys sorted, floats rendered by Python's
shortest-roundtrip repr, trailing newline, no NaN/Inf (they are rendered as
strings so reports stay parseable). CSV cells carry 17 significant digits.
"""

import json

import numpy as np


def _normalize(obj):
    """Recursively convert numpy scalars/arrays and guard non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_normalize(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if not np.isfinite(x):
            return repr(x)
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def canonical_json(payload):
    """Serialize to the canonical byte-stable JSON text."""
    return json.dumps(_normalize(payload), sort_keys=True, indent=2) + "\n"


def write_json_report(path, payload):
    text = canonical_json(payload)
    with open(path, "w") as fh:
        fh.write(text)
    return text


def format_float(x):
    """17 significant digits, enough to round-trip any float64."""
    return f"{float(x):.17g}"


def write_csv_report(path, header, rows):
    """Write rows of numbers (or strings) under a fixed header."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, str):
                cells.append(cell)
            elif isinstance(cell, (int, np.integer)) and not isinstance(cell, bool):
                cells.append(str(int(cell)))
            else:
                cells.append(format_float(cell))
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    return text


__all__ = ["canonical_json", "write_json_report", "format_float", "write_csv_report"]
