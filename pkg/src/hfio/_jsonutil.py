"""Canonical JSON emission: deterministic key order, numpy-safe scalars."""

from __future__ import annotations

import json

import numpy as np


def jsonable(obj):
    """Recursively convert numpy containers/scalars to plain Python."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.complexfloating, complex)):
        return {"re": float(np.real(obj)), "im": float(np.imag(obj))}
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def canonical_dumps(obj) -> str:
    """Deterministic JSON text: sorted keys, 2-space indent, '\\n' EOL."""
    return json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n"


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        fh.write(canonical_dumps(obj))


def load_json(path):
    with open(path) as fh:
        return json.load(fh)
