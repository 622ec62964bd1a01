"""Experiment configuration: one JSON document per run.

Every command has a parameter block with central defaults; unknown keys are
rejected by name.  Complex numbers are [re, im] pairs and eps-hat is
{"r": ..., "theta": ...}.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

from .errors import ConfigInvalid

TOLERANCES = {
    "series_invariants": 1e-10,
    "separatrix_rtol": 1e-10,
    "fatou_defect": 1e-8,
    "horn_linearity": 1e-6,
    "compatibility": 1e-4,
    "resurgence_residual": 1e-8,
    "borel_relative": 1e-4,
    "holonomy_multiplier": 1e-8,
    "monodromy_rtol": 1e-12,
    "stokes_structure": 1e-6,
    "equivalence": 1e-8,
}

EULER_SYSTEM = {"preset": "euler"}

DEFAULTS: dict[str, dict] = {
    "portrait": {"k": 1, "eps": [[-0.04, 0.0]], "alpha": 0.0, "variant": "P", "grid": None},
    "zones": {"k": 1, "eps": [[-0.04, 0.0]], "alpha": 0.0, "variant": "P"},
    "classify-des": {"k": 2, "vary": 0, "fixed": [[0.0, 0.0], [0.0, 0.0]],
                     "grid": {"re": [-1.0, 1.0, 10], "im": [-1.0, 1.0, 10]}, "samples": 0,
                     "box": 1.5, "variant": "P", "margins": True},
    "fatou": {"germ": {"kind": "model", "k": 1, "a": [0.0, 0.0]}, "petal": "attracting",
              "points": [[0.0, 0.0]], "normalization": "base"},
    "horn": {"germ": {"kind": "model", "k": 1, "a": [0.0, 0.0]}, "end": "0", "samples": 64},
    "lavaurs": {"eps_hat": {"r": 0.01, "theta": 3.14159}, "a": [0.0, 0.0]},
    "resurgence": {"psi0_linear": [1.0, 0.0], "a": [0.0, 0.0], "p": 1, "q": 1, "n": [5, 40]},
    "glutsyuk": {"germ": {"kind": "polynomial", "coeffs": [[0, 0], [1, 0], [1, 0], [0, 0], [1, 0]]},
                 "eps": [0.0, 0.01], "samples": 64},
    "center-manifold": {"family": "euler", "x": -0.05, "method": "all", "N": 40},
    "holonomy": {"kind": "saddle-node", "k": 1, "A": [0.0, 0.0], "p": 1, "q": 1,
                 "radius": 0.05, "samples": 32},
    "invariants": {"eps": "1/25", "A": "1"},
    "return-map": {"eps_hat": {"r": 0.01, "theta": 3.14159}, "a": [0.0, 0.0], "end": "0", "samples": 32},
    "resurgence-node": {"n": [5, 8], "A": 0.0},
    "monodromy": {"system": EULER_SYSTEM, "eps": [0.04, 0.0], "around": "+", "radius": None},
    "stokes": {"system": EULER_SYSTEM, "eps_hat": {"r": 0.01, "theta": 0.3}, "route": "auto"},
    "stokes-limit": {"system": EULER_SYSTEM, "eps0": 0.01, "dyadic": 8},
    "compare-stokes": {"first": None, "second": None},
    "catalan": {"k": [1, 6]},
}

OUTPUT_KEYS = ("json", "svg", "csv")


@dataclass
class ExperimentConfig:
    command: str
    params: dict
    seed: int = 0
    output: dict = field(default_factory=dict)

    @classmethod
    def build(cls, command: str, params: dict | None = None, seed: int = 0,
              output: dict | None = None) -> "ExperimentConfig":
        if command not in DEFAULTS:
            raise ConfigInvalid(f"unknown command '{command}'", key="command")
        merged = copy.deepcopy(DEFAULTS[command])
        for key, val in (params or {}).items():
            if key not in merged:
                raise ConfigInvalid(f"unknown key '{key}' for {command}", key=key)
            merged[key] = val
        out = dict(output or {})
        for key in out:
            if key not in OUTPUT_KEYS:
                raise ConfigInvalid(f"unknown output key '{key}'", key=key)
        if not isinstance(seed, int):
            raise ConfigInvalid("seed must be an integer", key="seed")
        return cls(command, merged, seed, out)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        allowed = {"command", "params", "seed", "output"}
        for key in data:
            if key not in allowed:
                raise ConfigInvalid(f"unknown key '{key}'", key=key)
        if "command" not in data:
            raise ConfigInvalid("missing key 'command'", key="command")
        return cls.build(data["command"], data.get("params"), data.get("seed", 0), data.get("output"))

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config: {exc}", path=path) from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {"command": self.command, "params": copy.deepcopy(self.params),
                "seed": self.seed, "output": dict(self.output)}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def cplx(v) -> complex:
    """[re, im], a number, or a string such as '1+2j'."""
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ConfigInvalid(f"complex value needs [re, im], got {v}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        try:
            return complex(v.replace(" ", ""))
        except ValueError:
            raise ConfigInvalid(f"cannot parse complex '{v}'") from None
    if isinstance(v, (int, float, complex)):
        return complex(v)
    raise ConfigInvalid(f"cannot parse complex {v!r}")


def cplx_list(vs) -> list:
    if isinstance(vs, (list, tuple)) and len(vs) == 2 and all(isinstance(x, (int, float)) for x in vs):
        # a single [re, im] pair is ambiguous with a list of two reals; lists of pairs are required
        return [cplx(vs)]
    return [cplx(v) for v in vs]
