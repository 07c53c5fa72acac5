"""Scenario documents: JSON in, validated instances out, and back.

A scenario file looks like::

    {
      "name": "collapse",
      "atoms": [{"id": "a", "mass": 1.0}, {"id": "b", "mass": 2.0}],
      "phi": {"a": "a", "b": "a"},
      "w": {"a": [1.0, 0.0], "b": 2.0},
      "family": {"a": [{"t": 9.0, "p": 1.0}], "b": [{"t": 9.0, "p": 1.0}]},
      "grid": [0.0, 9.0],
      "options": {"tol": 1e-10, "nmax": 6, "seed": 0}
    }

``family``, ``grid`` and ``options`` are optional. Atom order in the file is
the basis order. Complex weights are ``[re, im]`` pairs; plain numbers are
read as real weights. Every validation error names the offending field.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import WcoError
from .space import MeasureSpace, SystemInstance
from .subnormality import ProbabilityFamily
from .tolerance import DEFAULT

TOP_LEVEL_KEYS = {"name", "description", "atoms", "phi", "w", "family", "grid", "options"}
OPTION_KEYS = {"tol", "nmax", "seed"}


class ScenarioError(WcoError, ValueError):
    """Invalid scenario input; ``field`` is a path such as ``atoms[1].mass``."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}" if field_path else message)
        self.field = field_path
        self.detail = message


class ScenarioParseError(ScenarioError):
    """The document is not well-formed JSON."""


@dataclass(eq=False)
class Scenario:
    name: str
    instance: SystemInstance
    family: ProbabilityFamily | None = None
    grid: tuple[float, ...] | None = None
    options: dict = field(default_factory=dict)

    @property
    def space(self) -> MeasureSpace:
        return self.instance.space

    def to_dict(self) -> dict:
        return scenario_to_dict(self)


# --------------------------------------------------------------------------
# reading


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(where, f"expected a number, got {value!r}")
    x = float(value)
    if not math.isfinite(x):
        raise ScenarioError(where, f"expected a finite number, got {value!r}")
    return x


def _complex(value: Any, where: str) -> complex:
    if isinstance(value, list):
        if len(value) != 2:
            raise ScenarioError(where, f"complex numbers are [re, im] pairs, got {value!r}")
        return complex(_number(value[0], f"{where}[0]"), _number(value[1], f"{where}[1]"))
    return complex(_number(value, where), 0.0)


def _object(doc: dict, key: str, where: str | None = None) -> dict:
    value = doc.get(key)
    where = where or key
    if not isinstance(value, dict):
        raise ScenarioError(where, f"expected an object, got {type(value).__name__}")
    return value


def _atoms(doc: dict) -> MeasureSpace:
    raw = doc.get("atoms")
    if not isinstance(raw, list) or not raw:
        raise ScenarioError("atoms", "expected a nonempty list of {\"id\", \"mass\"} objects")
    ids, masses, seen = [], [], set()
    for i, item in enumerate(raw):
        where = f"atoms[{i}]"
        if not isinstance(item, dict) or set(item) != {"id", "mass"}:
            raise ScenarioError(where, "expected an object with exactly the keys 'id' and 'mass'")
        atom = item["id"]
        if not isinstance(atom, str) or not atom:
            raise ScenarioError(f"{where}.id", f"atom ids are nonempty strings, got {atom!r}")
        if atom in seen:
            raise ScenarioError(f"{where}.id", f"duplicate atom id {atom!r}")
        seen.add(atom)
        mass = _number(item["mass"], f"{where}.mass")
        if mass <= 0:
            raise ScenarioError(f"{where}.mass", f"atom {atom!r} has mass {mass!r}; masses must be > 0")
        ids.append(atom)
        masses.append(mass)
    return MeasureSpace(tuple(ids), np.array(masses))


def _per_atom(doc: dict, key: str, space: MeasureSpace) -> dict:
    table = _object(doc, key)
    for atom in table:
        if atom not in space.atoms:
            raise ScenarioError(f"{key}.{atom}", f"unknown atom {atom!r}")
    for atom in space.atoms:
        if atom not in table:
            raise ScenarioError(f"{key}.{atom}", f"no value given for atom {atom!r}")
    return table


def _family(doc: dict, space: MeasureSpace) -> ProbabilityFamily | None:
    if doc.get("family") is None:
        return None
    table = _per_atom(doc, "family", space)
    measures = []
    for atom in space.atoms:
        where = f"family.{atom}"
        items = table[atom]
        if not isinstance(items, list) or not items:
            raise ScenarioError(where, "expected a nonempty list of {\"t\", \"p\"} objects")
        pairs = []
        for k, item in enumerate(items):
            if not isinstance(item, dict) or set(item) != {"t", "p"}:
                raise ScenarioError(f"{where}[{k}]", "expected an object with exactly the keys 't' and 'p'")
            t = _number(item["t"], f"{where}[{k}].t")
            p = _number(item["p"], f"{where}[{k}].p")
            if t < 0:
                raise ScenarioError(f"{where}[{k}].t", f"locations lie in [0, inf), got {t!r}")
            if not 0 <= p <= 1:
                raise ScenarioError(f"{where}[{k}].p", f"masses lie in [0, 1], got {p!r}")
            pairs.append((t, p))
        total = math.fsum(p for _, p in pairs)
        if abs(total - 1.0) > DEFAULT.rel:
            raise ScenarioError(where, f"masses sum to {total!r}, not 1")
        measures.append(pairs)
    try:
        return ProbabilityFamily.from_measures(space, measures)
    except ValueError as exc:
        raise ScenarioError("family", str(exc)) from None


def _grid(doc: dict) -> tuple[float, ...] | None:
    raw = doc.get("grid")
    if raw is None:
        return None
    if not isinstance(raw, list) or not raw:
        raise ScenarioError("grid", "expected a nonempty list of numbers")
    out = []
    for k, v in enumerate(raw):
        t = _number(v, f"grid[{k}]")
        if t < 0:
            raise ScenarioError(f"grid[{k}]", f"grid points lie in [0, inf), got {t!r}")
        out.append(t)
    return tuple(out)


def _options(doc: dict) -> dict:
    raw = doc.get("options")
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ScenarioError("options", "expected an object")
    unknown = sorted(set(raw) - OPTION_KEYS)
    if unknown:
        raise ScenarioError(f"options.{unknown[0]}", f"unknown option; expected one of {sorted(OPTION_KEYS)}")
    out = {}
    if "tol" in raw:
        tol = _number(raw["tol"], "options.tol")
        if tol <= 0:
            raise ScenarioError("options.tol", "tolerance must be > 0")
        out["tol"] = tol
    for key in ("nmax", "seed"):
        if key in raw:
            v = raw[key]
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ScenarioError(f"options.{key}", f"expected a nonnegative integer, got {v!r}")
            out[key] = v
    return out


def scenario_from_dict(doc: Any) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("", "a scenario is a JSON object")
    unknown = sorted(set(doc) - TOP_LEVEL_KEYS)
    if unknown:
        raise ScenarioError(unknown[0], f"unknown key; expected some of {sorted(TOP_LEVEL_KEYS)}")
    name = doc.get("name", "unnamed")
    if not isinstance(name, str):
        raise ScenarioError("name", "expected a string")
    space = _atoms(doc)
    phi_map = _per_atom(doc, "phi", space)
    phi = []
    for atom in space.atoms:
        target = phi_map[atom]
        if not isinstance(target, str) or target not in space.atoms:
            raise ScenarioError(f"phi.{atom}", f"phi({atom}) = {target!r} is not a declared atom")
        phi.append(space.index(target))
    w_map = _per_atom(doc, "w", space)
    w = [_complex(w_map[atom], f"w.{atom}") for atom in space.atoms]
    inst = SystemInstance(space, np.array(phi, np.intp), np.array(w, complex))
    return Scenario(name, inst, _family(doc, space), _grid(doc), _options(doc))


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioParseError("", f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError("", f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(doc)


# --------------------------------------------------------------------------
# writing


def scenario_to_dict(sc: Scenario) -> dict:
    inst = sc.instance
    atoms = inst.space.atoms
    doc: dict = {
        "name": sc.name,
        "atoms": [{"id": a, "mass": float(m)} for a, m in zip(atoms, inst.mu)],
        "phi": {a: atoms[int(j)] for a, j in zip(atoms, inst.phi)},
        "w": {a: [float(z.real), float(z.imag)] for a, z in zip(atoms, inst.w)},
    }
    if sc.family is not None:
        doc["family"] = {a: [{"t": t, "p": p} for t, p in sc.family.measure(i)]
                         for i, a in enumerate(atoms)}
    if sc.grid is not None:
        doc["grid"] = [float(t) for t in sc.grid]
    if sc.options:
        doc["options"] = dict(sc.options)
    return doc


def dumps_scenario(sc: Scenario) -> str:
    return json.dumps(scenario_to_dict(sc), indent=2)


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(sc) + "\n", encoding="utf-8")
