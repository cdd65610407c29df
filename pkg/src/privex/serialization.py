"""JSON/CSV encoding shared by the library and the CLI."""
from __future__ import annotations

import json
import math
from pathlib import Path

from .errors import InputError
from .prob_core import Channel, JointDistribution

SIG_DIGITS = 12


def fmt(x) -> str:
    """Format a number with 12 significant digits (``inf``/``nan`` spelled out)."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    out = f"{x:.{SIG_DIGITS}g}"
    return "0" if out == "-0" else out


def round_floats(obj):
    """Recursively round floats to 12 significant digits for stable JSON."""
    if isinstance(obj, float):
        if math.isfinite(obj):
            return float(fmt(obj))
        return fmt(obj)
    if isinstance(obj, dict):
        return {k: round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(round_floats(obj), indent=2, sort_keys=False) + "\n"


def serialize_channel(ch: Channel) -> str:
    return json.dumps(round_floats(ch.to_dict()), separators=(",", ":"))


def csv_table(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _load_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if exc.lineno - 1 < len(text.splitlines()) else ""
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {line.strip()}") from None


def load_joint(path) -> JointDistribution:
    data = _load_json(path)
    try:
        return JointDistribution.from_dict(data)
    except InputError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def load_channel(path) -> Channel:
    data = _load_json(path)
    if isinstance(data, dict) and "filter" in data:
        data = data["filter"]
    if not isinstance(data, dict):
        raise InputError(f"{path}: channel JSON must be an object")
    return Channel.from_dict(data)
