"""Deterministic JSON output with 17-significant-digit floats."""

import hashlib
import json
import math

import numpy as np


def _encode(obj, indent, level):
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," + pad if indent else ", "
    if obj is None or obj is True or obj is False:
        return json.dumps(obj)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return "null"
        return "%.17g" % v
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ["%s: %s" % (json.dumps(str(k), ensure_ascii=False),
                             _encode(v, indent, level + 1))
                 for k, v in obj.items()]
        return "{" + pad + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        inner = [_encode(v, indent, level + 1) for v in obj]
        if indent and all(not isinstance(v, (dict, list, tuple, np.ndarray))
                          for v in obj):
            return "[" + ", ".join(inner) + "]"
        return "[" + pad + sep.join(inner) + end + "]"
    raise TypeError("cannot serialize %r" % type(obj))


def dumps(obj, indent=2):
    """Serialize like ``json.dumps`` but with every float at 17 digits."""
    return _encode(obj, indent, 0)


def dump_file(obj, path, indent=2):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj, indent) + "\n")


def config_hash(obj):
    """Short sha256 of the canonical (sorted-key) JSON form of ``obj``."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
