"""Finite atomic measure spaces and the measures derived from a weight and a symbol.

Every function here works on the atom order declared by the
:class:`MeasureSpace`; maps over atoms are stored as numpy arrays indexed by
that order (``phi`` as an integer index array, ``w`` as a complex array).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import SpaceMismatchError

DERIVED_KINDS = ("mu_w", "mu_sup_w", "pushforward", "custom")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MeasureSpace:
    """A finite set of labelled atoms, each carrying a strictly positive mass."""

    atoms: tuple[str, ...]
    mass: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        atoms = tuple(str(a) for a in self.atoms)
        mass = np.asarray(self.mass, dtype=float)
        if len(atoms) == 0:
            raise ValueError("a measure space needs at least one atom")
        if mass.shape != (len(atoms),):
            raise ValueError(f"expected {len(atoms)} masses, got shape {mass.shape}")
        if len(set(atoms)) != len(atoms):
            dup = sorted({a for a in atoms if atoms.count(a) > 1})
            raise ValueError(f"duplicate atom identifiers: {dup}")
        bad = [a for a, m in zip(atoms, mass) if not (np.isfinite(m) and m > 0)]
        if bad:
            raise ValueError(f"atom masses must be finite and > 0; offending atoms: {bad}")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "mass", _frozen(mass))
        object.__setattr__(self, "_index", {a: i for i, a in enumerate(atoms)})

    @classmethod
    def from_mapping(cls, masses: Mapping[str, float]) -> "MeasureSpace":
        return cls(tuple(masses), np.array(list(masses.values()), dtype=float))

    @classmethod
    def counting(cls, atoms: Sequence[str]) -> "MeasureSpace":
        return cls(tuple(atoms), np.ones(len(atoms)))

    def __len__(self) -> int:
        return len(self.atoms)

    def index(self, atom: str) -> int:
        try:
            return self._index[atom]
        except KeyError:
            raise KeyError(f"unknown atom {atom!r}") from None

    def same_as(self, other: "MeasureSpace") -> bool:
        return self is other or (
            self.atoms == other.atoms and np.array_equal(self.mass, other.mass)
        )

    def require_same(self, other: "MeasureSpace") -> None:
        if not self.same_as(other):
            raise SpaceMismatchError("objects live on different measure spaces")


@dataclass(frozen=True, eq=False)
class SystemInstance:
    """The defining data (space, symbol phi, weight w) of a weighted composition operator."""

    space: MeasureSpace
    phi: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        n = len(self.space)
        phi = np.asarray(self.phi)
        if phi.shape != (n,):
            raise ValueError(f"phi must have {n} entries, got shape {phi.shape}")
        if not np.issubdtype(phi.dtype, np.integer):
            raise ValueError("phi must be an integer index array")
        if np.any(phi < 0) or np.any(phi >= n):
            raise ValueError("phi must map every atom to an atom of the space")
        w = np.asarray(self.w, dtype=complex)
        if w.shape != (n,):
            raise ValueError(f"w must have {n} entries, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "phi", _frozen(phi.astype(np.intp)))
        object.__setattr__(self, "w", _frozen(w))

    @classmethod
    def from_mappings(
        cls,
        masses: Mapping[str, float],
        phi: Mapping[str, str],
        w: Mapping[str, complex],
    ) -> "SystemInstance":
        space = MeasureSpace.from_mapping(masses)
        missing = [a for a in space.atoms if a not in phi or a not in w]
        if missing:
            raise ValueError(f"phi and w must be defined on every atom; missing: {missing}")
        phi_idx = np.array([space.index(phi[a]) for a in space.atoms], dtype=np.intp)
        weights = np.array([complex(w[a]) for a in space.atoms])
        return cls(space, phi_idx, weights)

    @property
    def n(self) -> int:
        return len(self.space)

    @property
    def mu(self) -> np.ndarray:
        return self.space.mass

    @property
    def support(self) -> np.ndarray:
        """Boolean mask of ``{w != 0}`` (exact comparison)."""
        return self.w != 0

    @property
    def is_multiplication(self) -> bool:
        return bool(np.array_equal(self.phi, np.arange(self.n)))

    def with_weight(self, w) -> "SystemInstance":
        return SystemInstance(self.space, self.phi, w)

    def with_symbol(self, phi) -> "SystemInstance":
        return SystemInstance(self.space, phi, self.w)


@dataclass(frozen=True, eq=False)
class DerivedMeasure:
    base: MeasureSpace
    mass: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=float)
        if mass.shape != (len(self.base),):
            raise ValueError("derived measure must assign a mass to every atom")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise ValueError("derived masses must be finite and nonnegative")
        if self.kind not in DERIVED_KINDS:
            raise ValueError(f"unknown measure kind {self.kind!r}")
        object.__setattr__(self, "mass", _frozen(mass))

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    @property
    def null_atoms(self) -> np.ndarray:
        return self.mass == 0


def base_measure(space: MeasureSpace) -> DerivedMeasure:
    """The measure mu itself, wrapped so it can be compared with derived ones."""
    return DerivedMeasure(space, space.mass, "custom")


def make_mu_w(inst: SystemInstance) -> DerivedMeasure:
    """``mu_w({x}) = |w(x)|^2 mu(x)``."""
    return DerivedMeasure(inst.space, np.abs(inst.w) ** 2 * inst.mu, "mu_w")


def make_mu_sup_w(inst: SystemInstance) -> DerivedMeasure:
    """``mu^w({x}) = mu(x)`` on ``{w != 0}`` and 0 elsewhere."""
    return DerivedMeasure(inst.space, np.where(inst.support, inst.mu, 0.0), "mu_sup_w")


def pushforward(m: DerivedMeasure, phi) -> DerivedMeasure:
    """Image measure ``m o phi^{-1}``: mass of every fiber collected at its image."""
    phi = np.asarray(phi, dtype=np.intp)
    n = len(m.base)
    if phi.shape != (n,):
        raise SpaceMismatchError("phi and the measure are defined over different atom sets")
    return DerivedMeasure(m.base, np.bincount(phi, weights=m.mass, minlength=n), "pushforward")


def is_absolutely_continuous(num: DerivedMeasure, den: DerivedMeasure) -> bool:
    """``num << den`` on a finite atomic space: every den-null atom is num-null."""
    num.base.require_same(den.base)
    return bool(np.all(num.mass[den.mass == 0] == 0))
