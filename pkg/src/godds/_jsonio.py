"""Deterministic JSON emission.

Floats are written with 17 significant digits so every value round-trips
exactly; identical objects always serialize to identical bytes, which the
study reports rely on for reproducibility checks.
"""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np


def _format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError(f"cannot serialize non-finite float {x}")
    s = format(float(x), ".17g")
    if not any(c in s for c in ".eE"):
        s += ".0"
    return s


def _write(obj: Any, parts: list[str], indent: int | None, level: int) -> None:
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end_pad = "" if indent is None else "\n" + " " * (indent * level)
    if obj is None:
        parts.append("null")
    elif isinstance(obj, bool) or isinstance(obj, np.bool_):
        parts.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        parts.append(_format_float(float(obj)))
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            parts.append("{}")
            return
        parts.append("{")
        for i, (key, val) in enumerate(obj.items()):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be str, got {type(key).__name__}")
            if i:
                parts.append("," if indent is None else ",")
            parts.append(pad)
            parts.append(json.dumps(key))
            parts.append(": " if indent is not None else ":")
            _write(val, parts, indent, level + 1)
        parts.append(end_pad)
        parts.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not len(seq):
            parts.append("[]")
            return
        parts.append("[")
        for i, val in enumerate(seq):
            if i:
                parts.append(",")
            parts.append(pad)
            _write(val, parts, indent, level + 1)
        parts.append(end_pad)
        parts.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} to JSON")


def dumps(obj: Any, indent: int | None = None) -> str:
    parts: list[str] = []
    _write(obj, parts, indent, 0)
    return "".join(parts)
