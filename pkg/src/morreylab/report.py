"""Structured records of inequality checks and their deterministic JSON form."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

REPORT_FIELDS = ("check_id", "anchor", "left", "right", "constant", "passed",
                 "witnesses", "grid", "runtime_s", "details")


@dataclass
class VerificationReport:
    check_id: str
    anchor: str
    left: float
    right: float
    constant: float
    passed: bool
    witnesses: Dict[str, Any] = field(default_factory=dict)
    grid: Dict[str, Any] = field(default_factory=dict)
    runtime_s: float = 0.0
    details: Dict[str, Any] = field(default_factory=dict)

    def __bool__(self):
        return bool(self.passed)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in REPORT_FIELDS}

    def to_json(self) -> str:
        return dumps(self.as_dict())

    def numeric_fingerprint(self) -> str:
        """Serialized report minus wall-clock time; equal across identical runs."""
        d = self.as_dict()
        d.pop("runtime_s")
        return dumps(d)


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    return format(x, ".17g")


def _encode(obj, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, complex):
        return _encode([obj.real, obj.imag], indent, level)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [json.dumps(str(k)) + ": " + _encode(v, indent, level + 1)
                 for k, v in obj.items()]
        return "{" + pad + ("," + pad).join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level) for v in obj) + "]"
        items = [_encode(v, indent, level + 1) for v in obj]
        return "[" + pad + ("," + pad).join(items) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def array_hash(a: np.ndarray) -> str:
    a = np.ascontiguousarray(a)
    h = hashlib.sha256()
    h.update(str(a.dtype).encode())
    h.update(str(a.shape).encode())
    h.update(a.tobytes())
    return h.hexdigest()[:16]


def ratio_or_inf(num: float, den: float, tiny: Optional[float] = 0.0) -> float:
    if den <= tiny:
        return 0.0 if num <= tiny else math.inf
    return num / den
