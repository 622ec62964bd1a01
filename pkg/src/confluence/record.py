"""Run records and deterministic artifact output."""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__


def to_plain(obj):
    """JSON-ready structure; complex values become [re, im]."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (complex, np.complexfloating)):
        z = complex(obj)
        return [to_plain(z.real), to_plain(z.imag)]
    if isinstance(obj, Fraction):
        return str(obj)
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_json"):
        return to_plain(obj.to_json())
    return str(obj)


def dumps(obj) -> str:
    return json.dumps(to_plain(obj), sort_keys=True, indent=2) + "\n"


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def inputs_hash(config_dict: dict) -> str:
    return hashlib.sha256(dumps(config_dict).encode()).hexdigest()


@dataclass
class RunRecord:
    command: str
    config: dict
    tolerances: dict
    outputs: dict
    bounds: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    wall_time: float = 0.0

    def to_json(self, timing: bool = True) -> dict:
        out = {"tool": "confluence", "version": __version__, "command": self.command,
               "inputs_hash": inputs_hash(self.config), "config": self.config,
               "tolerances": self.tolerances, "outputs": self.outputs, "bounds": self.bounds,
               "artifacts": self.artifacts}
        if timing:
            out["timing"] = {"wall_time": self.wall_time}
        return out
