"""Canonical JSON/CSV emission: sorted keys, 17-significant-digit floats,
atomic writes. Reports carry no timestamps so reruns are byte-identical."""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile

from .errors import InputError


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise InputError("reports must contain only finite numbers")
    return "%.17g" % x


def canonical_json(obj, indent: int = 0) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        keys = sorted(str(k) for k in obj)
        raw = {str(k): v for k, v in obj.items()}
        items = [f"{inner}{json.dumps(k, ensure_ascii=False)}: "
                 f"{canonical_json(raw[k], indent + 1)}" for k in keys]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{inner}{canonical_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    # numpy scalars and similar
    if hasattr(obj, "item"):
        return canonical_json(obj.item(), indent)
    raise InputError(f"cannot serialize {type(obj).__name__} into a report")


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, obj) -> str:
    text = canonical_json(obj) + "\n"
    atomic_write_text(path, text)
    return sha256_text(text)


def write_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, float):
                cells.append(_fmt_float(cell))
            else:
                cells.append(str(cell))
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")
