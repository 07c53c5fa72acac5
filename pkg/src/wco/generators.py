"""Seeded instance generators for tests, the self-test and the ``generate`` command."""
from __future__ import annotations

import string

import numpy as np

from .space import MeasureSpace, SystemInstance
from .scenario import Scenario

KINDS = ("random", "quasinormal", "multiplication", "collapse", "cycle", "truncated-shift")


def _names(n: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(n))


def _phases(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.exp(2j * np.pi * rng.random(n))


def _weights(rng: np.random.Generator, n: int, zero_rate: float = 0.2) -> np.ndarray:
    w = rng.uniform(0.2, 3.0, n) * _phases(rng, n)
    w[rng.random(n) < zero_rate] = 0.0
    return w


def _masses(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(0.1, 10.0, n)


def cycles_of(phi: np.ndarray) -> list[list[int]]:
    """The cycles of a self-map of ``{0..n-1}``, each listed in orbit order."""
    n = phi.size
    state = np.zeros(n, np.int8)  # 0 unseen, 1 on current path, 2 done
    out = []
    for start in range(n):
        path = []
        x = start
        while state[x] == 0:
            state[x] = 1
            path.append(x)
            x = int(phi[x])
        if state[x] == 1:
            out.append(path[path.index(x):])
        for y in path:
            state[y] = 2
    return out


def _random(rng, n):
    space = MeasureSpace(_names(n), _masses(rng, n))
    return SystemInstance(space, rng.integers(0, n, n), _weights(rng, n))


def _quasinormal(rng, n):
    # {w != 0} is a union of whole cycles; along a cycle the weights are
    # chosen so that every atom receives the same mass c from its predecessor
    mu = _masses(rng, n)
    phi = rng.integers(0, n, n)
    cyc = cycles_of(phi)
    chosen = [c for c in cyc if rng.random() < 0.75] or [cyc[int(rng.integers(len(cyc)))]]
    w = np.zeros(n, complex)
    for c in chosen:
        level = rng.uniform(0.3, 5.0)
        for x in c:
            nxt = int(phi[x])
            w[x] = np.sqrt(level * mu[nxt] / mu[x]) * _phases(rng, 1)[0]
    return SystemInstance(MeasureSpace(_names(n), mu), phi, w)


def _multiplication(rng, n):
    space = MeasureSpace(_names(n), _masses(rng, n))
    return SystemInstance(space, np.arange(n), _weights(rng, n))


def _collapse(rng, n):
    names = tuple(string.ascii_lowercase[:n]) if n <= 26 else _names(n)
    vals = np.arange(1.0, n + 1)
    return SystemInstance(MeasureSpace(names, vals), np.zeros(n, np.intp), vals.astype(complex))


def _cycle(rng, n):
    w = rng.uniform(0.5, 2.0) * _phases(rng, n)
    return SystemInstance(MeasureSpace.counting(_names(n)), (np.arange(n) + 1) % n, w)


def _truncated_shift(rng, n):
    m = n + 1
    phi = np.maximum(np.arange(m) - 1, 0)
    w = rng.uniform(0.5, 2.0, m).astype(complex)
    return SystemInstance(MeasureSpace.counting(_names(m)), phi, w)


_BUILDERS = {
    "random": _random,
    "quasinormal": _quasinormal,
    "multiplication": _multiplication,
    "collapse": _collapse,
    "cycle": _cycle,
    "truncated-shift": _truncated_shift,
}


def generate_instance(kind: str, size: int, seed: int = 0) -> Scenario:
    """Deterministic scenario of the given kind.

    ``size`` is the atom count, except for ``truncated-shift`` which uses the
    atoms ``0..size``. ``collapse`` ignores the seed.
    """
    if kind not in _BUILDERS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    if int(size) < 1:
        raise ValueError("size must be >= 1")
    rng = np.random.default_rng(seed)
    inst = _BUILDERS[kind](rng, int(size))
    return Scenario(f"{kind}-{size}-s{seed}", inst, options={"seed": int(seed)})
