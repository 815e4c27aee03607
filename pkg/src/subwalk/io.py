"""Deterministic CSV/JSON output helpers."""

import json
import math
import os

SCHEMA = "subwalk/1"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _clean(obj.tolist())
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps(obj):
    """JSON text with sorted keys and a ``schema`` field at top level."""
    body = _clean(obj)
    if isinstance(body, dict):
        body.setdefault("schema", SCHEMA)
    return json.dumps(body, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_text(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def write_json(path, obj):
    return write_text(path, dumps(obj))
