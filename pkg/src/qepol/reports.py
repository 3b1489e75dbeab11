"""Analysis reports: canonical JSON documents.

A report records what was computed (kind + results), from which inputs,
and under which configuration and seed, so a result can be traced and
re-derived.  Serialization is canonical (sorted keys, fixed layout, no
timestamps), so identical analyses produce byte-identical files.
"""

import json
import math

import numpy as np

from . import __version__
from ._io import atomic_write_text
from .errors import ValidationError

__all__ = ["build_report", "write_report", "load_report"]


def _jsonable(obj):
    """Convert numpy types and non-finite floats to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def build_report(kind, results, parameters=None, inputs=None, seed=None):
    """Assemble a report document.

    kind names the analysis; results holds its outputs; parameters echoes
    the configuration it ran under; inputs lists the files it consumed.
    """
    if not isinstance(kind, str) or not kind:
        raise ValidationError("report kind must be a non-empty string")
    return {
        "tool": "qepol",
        "tool_version": __version__,
        "report": kind,
        "seed": _jsonable(seed),
        "inputs": _jsonable(list(inputs) if inputs else []),
        "parameters": _jsonable(parameters or {}),
        "results": _jsonable(results),
    }


def write_report(report, path):
    atomic_write_text(
        path, json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"
    )


def load_report(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
