"""Deterministic report emission: JSON and CSV with stable formatting.

All floating-point values are printed with 17 significant digits (exact
float64 round-trip), keys keep insertion order, and no timestamps or
absolute paths are embedded, so identical inputs produce byte-identical
files.
"""

import hashlib
import math

import numpy as np

SCHEMA_VERSION = "1"


def fmt_float(x):
    if isinstance(x, float) and (math.isnan(x) or math.isinf(x)):
        return "null"
    return format(float(x), ".17g")


def _emit(obj, out, indent):
    pad = " " * indent
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(fmt_float(float(obj)))
    elif isinstance(obj, str):
        out.append('"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"')
    elif isinstance(obj, complex):
        _emit({"re": obj.real, "im": obj.imag}, out, indent)
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), out, indent)
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = list(obj.items())
        for i, (k, v) in enumerate(items):
            out.append(pad + "  " + '"' + str(k) + '": ')
            _emit(v, out, indent + 2)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[")
        for i, v in enumerate(obj):
            _emit(v, out, indent)
            if i < len(obj) - 1:
                out.append(", ")
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj)}")


def dumps_json(obj) -> str:
    out = []
    _emit(obj, out, 0)
    out.append("\n")
    return "".join(out)


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps_json(obj))


def write_csv(path, header, rows):
    """Rows of numbers/strings; floats printed with 17 significant digits."""
    def cell(v):
        if isinstance(v, (float, np.floating)):
            return fmt_float(float(v))
        return str(v)

    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(cell(v) for v in row) + "\n")


def config_hash(cfg: dict) -> str:
    """sha256 of the canonicalized key=value listing."""
    lines = []
    for k in sorted(cfg):
        v = cfg[k]
        if isinstance(v, float):
            v = fmt_float(v)
        elif isinstance(v, (list, tuple)):
            v = "[" + ",".join(fmt_float(x) if isinstance(x, float) else str(x)
                               for x in v) + "]"
        lines.append(f"{k}={v}")
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()


def provenance(cfg: dict, **extra) -> dict:
    """Reproducibility header embedded in every report."""
    from . import __version__
    head = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "config_hash": config_hash(cfg),
    }
    head.update(extra)
    return head
