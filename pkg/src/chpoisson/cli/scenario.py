"""Scenario files: JSON envelope schema, validation and object construction.

A scenario looks like::

    {
      "schema_version": 1,
      "name": "harmonic_oscillator",
      "sampling": {"seed": 7, "count": 50, "box": [-2, 2]},
      "system": {
        "structure": {"builtin": "canonical", "n": 1},
        "hamiltonian": {"builtin": "quadratic", "matrix": [[1, 0], [0, 1]]}
      },
      "checks": [{"id": "energy", "type": "simulate", "x0": [1, 0], "t_final": 1}]
    }

The envelope is checked with ``jsonschema``; builtin references, dimensions
and per-check fields are then checked by building every object, so a
parsed :class:`Scenario` is ready to run.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from ..chsys import CHSystem, READINGS
from ..poisson import ScalarField
from .builtins import (SpecError, build_fiber_map, build_scalar, build_structure,
                       build_submanifold)

SCHEMA_VERSION = 1

ENVELOPE = {
    "type": "object",
    "required": ["name", "sampling", "system", "checks"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "sampling": {
            "type": "object",
            "required": ["seed"],
            "properties": {
                "seed": {"type": "integer", "minimum": 0},
                "count": {"type": "integer", "minimum": 1},
                "box": {"type": "array", "items": {"type": "number"},
                        "minItems": 2, "maxItems": 2},
            },
            "additionalProperties": False,
        },
        "tolerances": {"type": "object", "additionalProperties": {"type": "number",
                                                                  "exclusiveMinimum": 0}},
        "system": {
            "type": "object",
            "required": ["structure"],
            "properties": {
                "structure": {"type": "object"},
                "base_dim": {"type": "integer", "minimum": 0},
                "hamiltonian": {"type": "object"},
                "force": {"type": "object"},
                "control_subset": {"type": "object"},
                "control": {"type": "object"},
                "lift_reading": {"enum": list(READINGS)},
            },
            "additionalProperties": False,
        },
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "type"],
                "properties": {"id": {"type": "string", "minLength": 1},
                               "type": {"type": "string"}},
            },
        },
    },
    "additionalProperties": False,
}


class ScenarioError(ValueError):
    """All problems found in a scenario, each as ``(path, message)``."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.errors))


@dataclass
class SystemEnv:
    system: CHSystem
    spec: dict

    @property
    def dim(self):
        return self.system.dim


@dataclass
class PreparedCheck:
    id: str
    type: str
    spec: dict
    objects: dict


@dataclass
class Scenario:
    name: str
    seed: int
    count: int
    box: tuple
    env: SystemEnv
    checks: list
    tolerances: dict = field(default_factory=dict)
    description: str = ""
    raw: dict = field(default_factory=dict)


def _path(parts):
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def build_system(spec, path="$.system"):
    """Construct a :class:`CHSystem` from a system mapping."""
    b = build_structure(spec.get("structure"), f"{path}.structure")
    default_base = b.dim // 2 if b.kind == "canonical-symplectic" else 0
    base_dim = spec.get("base_dim", default_base)
    if not isinstance(base_dim, int) or not 0 <= base_dim <= b.dim:
        raise SpecError(f"{path}.base_dim", f"must be an integer in [0, {b.dim}]")
    h = (build_scalar(spec["hamiltonian"], b.dim, f"{path}.hamiltonian")
         if "hamiltonian" in spec else ScalarField.constant(0.0))
    force = (build_fiber_map(spec["force"], base_dim, b.dim, f"{path}.force")
             if "force" in spec else None)
    control = (build_fiber_map(spec["control"], base_dim, b.dim, f"{path}.control")
               if "control" in spec else None)
    w = (build_submanifold(spec["control_subset"], b.dim, f"{path}.control_subset")
         if "control_subset" in spec else None)
    reading = spec.get("lift_reading", "pushforward")
    if reading not in READINGS:
        raise SpecError(f"{path}.lift_reading", f"unknown reading {reading!r}")
    system = CHSystem(b, h, base_dim, force, w, control, reading)
    _probe(system, path)
    return SystemEnv(system, spec)


def _probe(system, path):
    """Evaluate every piece once at the origin to catch dimension mismatches."""
    x = np.zeros(system.dim)
    probes = [("structure", lambda: system.structure(x)),
              ("hamiltonian", lambda: system.hamiltonian.grad(x))]
    if system.force is not None:
        probes.append(("force", lambda: system.force(x)))
    if system.control is not None:
        probes.append(("control", lambda: system.control(x)))
    if system.control_subset is not None:
        probes.append(("control_subset", lambda: system.control_subset.cvalue(x)))
    for name, probe in probes:
        try:
            out = np.asarray(probe())
        except (ValueError, IndexError, TypeError) as exc:
            raise SpecError(f"{path}.{name}", f"dimension mismatch ({exc})") from None
        if name in ("hamiltonian", "force", "control") and out.shape != (system.dim,):
            raise SpecError(f"{path}.{name}", f"produces shape {out.shape}, "
                                              f"expected ({system.dim},)")


def parse_scenario(text):
    """Parse and validate scenario JSON text; raise :class:`ScenarioError` on problems."""
    from .checks import CHECK_TYPES

    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([("$", f"invalid JSON: {exc.msg} at line {exc.lineno}")]) from None
    validator = jsonschema.Draft202012Validator(ENVELOPE)
    errors = [(_path(e.absolute_path), e.message)
              for e in sorted(validator.iter_errors(raw), key=lambda e: _path(e.absolute_path))]
    if errors:
        raise ScenarioError(errors)

    try:
        env = build_system(raw["system"])
    except SpecError as exc:
        raise ScenarioError([(exc.path, exc.message)]) from None

    checks, seen = [], set()
    for k, spec in enumerate(raw["checks"]):
        path = f"$.checks[{k}]"
        if spec["id"] in seen:
            errors.append((f"{path}.id", f"duplicate check id {spec['id']!r}"))
            continue
        seen.add(spec["id"])
        kind = CHECK_TYPES.get(spec["type"])
        if kind is None:
            errors.append((f"{path}.type", f"unknown check type {spec['type']!r}; known: "
                                           f"{', '.join(sorted(CHECK_TYPES))}"))
            continue
        try:
            objects = kind.prepare(spec, env, path)
        except SpecError as exc:
            errors.append((exc.path, exc.message))
            continue
        checks.append(PreparedCheck(spec["id"], spec["type"], spec, objects))
    if errors:
        raise ScenarioError(errors)

    sampling = raw["sampling"]
    return Scenario(name=raw["name"], seed=sampling["seed"], count=sampling.get("count", 100),
                    box=tuple(sampling.get("box", (-2.0, 2.0))), env=env, checks=checks,
                    tolerances=dict(raw.get("tolerances", {})),
                    description=raw.get("description", ""), raw=raw)
