"""Canonical JSON: sorted keys, fixed float text, LF endings.

Floats are written with 17 significant digits (``%.17g``), which round-trips
every IEEE double and uses positional notation for magnitudes in
``[1e-4, 1e17)``. A ``.0`` is appended when needed so floats stay floats.
"""

from __future__ import annotations

import json
import math

import numpy as np


def format_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite float {x!r} cannot be serialised")
    if x == 0.0:
        return "-0.0" if math.copysign(1.0, x) < 0 else "0.0"
    s = f"{x:.17g}"
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def _encode(obj, out):
    if obj is None:
        out.append("null")
    elif obj is True or obj is False or isinstance(obj, np.bool_):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        out.append("{")
        for n, key in enumerate(sorted(obj, key=str)):
            if n:
                out.append(",")
            out.append(json.dumps(str(key), ensure_ascii=False))
            out.append(":")
            _encode(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for n, item in enumerate(obj):
            if n:
                out.append(",")
            _encode(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def canonical_dumps(obj) -> str:
    out = []
    _encode(obj, out)
    return "".join(out)


def write_canonical(obj, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(canonical_dumps(obj))
        fh.write("\n")


def write_jsonl(records, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(canonical_dumps(rec))
            fh.write("\n")


def read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
