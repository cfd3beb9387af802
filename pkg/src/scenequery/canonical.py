"""Byte-stable JSON: sorted keys, floats rounded to 6 decimal places."""

import json
import math


def _walk(value):
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError("non-finite float in canonical JSON")
        rounded = round(value, 6)
        return rounded + 0.0  # fold -0.0 into 0.0
    if isinstance(value, dict):
        return {str(k): _walk(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_walk(v) for v in value]
    return value


def canonical_dumps(obj) -> str:
    return json.dumps(_walk(obj), sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False) + "\n"


def canonical_write(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(canonical_dumps(obj))
