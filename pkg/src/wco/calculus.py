"""Radon-Nikodym derivative, change of variables and conditional expectation.

On a finite atomic space the sigma-algebra ``phi^{-1}(A)`` is generated by the
fibers ``phi^{-1}({z})``, so conditioning is fiber averaging with respect to
``mu_w``. Values that are only defined up to a null set are filled with a
fixed convention and flagged in ``DensityFunction.mask``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import PostconditionError, PreconditionError
from .space import (
    MeasureSpace,
    SystemInstance,
    make_mu_sup_w,
    pushforward,
)
from .tolerance import DEFAULT, deviation

SCOPES = ("mu", "mu_w")


@dataclass(frozen=True, eq=False)
class DensityFunction:
    """A function on the atoms, canonical up to null sets of ``ae_scope``.

    ``mask`` marks atoms whose value is a convention (0 for ``{h=0}``
    representatives and zero-mass fibers) rather than forced by the data.
    """

    space: MeasureSpace
    values: np.ndarray
    ae_scope: str = "mu"
    mask: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != (len(self.space),):
            raise ValueError("a density needs one value per atom")
        if self.ae_scope not in SCOPES:
            raise ValueError(f"ae_scope must be one of {SCOPES}")
        mask = np.zeros(len(self.space), bool) if self.mask is None else np.asarray(self.mask, bool)
        values = values.copy()
        values.setflags(write=False)
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @property
    def canonical(self) -> np.ndarray:
        return ~self.mask

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __getitem__(self, atom):
        if isinstance(atom, str):
            return self.values[self.space.index(atom)]
        return self.values[atom]

    def as_dict(self) -> dict:
        return {a: self.values[i] for i, a in enumerate(self.space.atoms)}


def values_of(f, n: int) -> np.ndarray:
    """Coerce a density, array or scalar into an array of ``n`` atom values."""
    if isinstance(f, DensityFunction):
        arr = f.values
    elif hasattr(f, "coeffs"):
        arr = f.coeffs
    else:
        arr = np.asarray(f)
        if arr.ndim == 0:
            arr = np.full(n, arr[()])
    if arr.shape != (n,):
        raise ValueError(f"expected {n} atom values, got shape {arr.shape}")
    return arr


def fiber_mass(inst: SystemInstance) -> np.ndarray:
    """``mu_w(phi^{-1}({z}))`` for every atom z."""
    return np.bincount(inst.phi, weights=np.abs(inst.w) ** 2 * inst.mu, minlength=inst.n)


def _fiber_sum(inst: SystemInstance, f: np.ndarray) -> np.ndarray:
    weights = f * (np.abs(inst.w) ** 2 * inst.mu)
    if np.iscomplexobj(weights):
        return (np.bincount(inst.phi, weights=weights.real, minlength=inst.n)
                + 1j * np.bincount(inst.phi, weights=weights.imag, minlength=inst.n))
    return np.bincount(inst.phi, weights=weights, minlength=inst.n)


def compute_h(inst: SystemInstance) -> DensityFunction:
    """Radon-Nikodym derivative of ``mu_w o phi^{-1}`` with respect to ``mu``."""
    return DensityFunction(inst.space, fiber_mass(inst) / inst.mu, "mu")


def change_of_variables(inst: SystemInstance, f, *, check: bool = True, tol: float = DEFAULT.rel):
    """Integral of ``f o phi`` against ``mu_w``, cross-checked against ``int f h dmu``."""
    f = values_of(f, inst.n)
    lhs = np.sum(f[inst.phi] * np.abs(inst.w) ** 2 * inst.mu)
    if check:
        h = fiber_mass(inst) / inst.mu
        # summed in reverse atom order so the two routes share no partial sums
        rhs = np.sum((f * h * inst.mu)[::-1])
        scale = max(1.0, abs(lhs), abs(rhs), float(np.sum(np.abs(f[inst.phi]) * np.abs(inst.w) ** 2 * inst.mu)))
        if abs(lhs - rhs) > tol * scale:
            raise PostconditionError(f"change of variables mismatch: {lhs} vs {rhs}")
    return lhs.item()


def cond_expectation(inst: SystemInstance, f) -> DensityFunction:
    """Conditional expectation of f with respect to ``phi^{-1}(A)`` in ``L^2(mu_w)``.

    On an atom x the value is the ``mu_w``-average of f over the fiber
    ``phi^{-1}({phi(x)})``. Fibers of zero ``mu_w`` mass get the value 0.
    The result is canonical only on ``{w != 0}``; all other atoms are masked.
    """
    f = values_of(f, inst.n)
    mass = fiber_mass(inst)
    num = _fiber_sum(inst, f)
    fiber_value = np.zeros(inst.n, dtype=num.dtype)
    pos = mass > 0
    fiber_value[pos] = num[pos] / mass[pos]
    return DensityFunction(inst.space, fiber_value[inst.phi], "mu_w", ~inst.support)


def cond_expectation_inv(
    inst: SystemInstance, f, *, check: bool = True, tol: float = DEFAULT.abs
) -> DensityFunction:
    """The representative ``g = E(f) o phi^{-1}`` that vanishes on ``{h = 0}``.

    ``g(z)`` is the fiber average over ``phi^{-1}({z})``; ``g o phi`` agrees
    with ``E(f)`` on every atom of positive ``mu_w`` mass.
    """
    f = values_of(f, inst.n)
    mass = fiber_mass(inst)
    num = _fiber_sum(inst, f)
    g = np.zeros(inst.n, dtype=num.dtype)
    pos = mass > 0
    g[pos] = num[pos] / mass[pos]
    out = DensityFunction(inst.space, g, "mu", ~pos)
    if check:
        e = cond_expectation(inst, f)
        sup = inst.support
        if deviation(g[inst.phi][sup], e.values[sup]) > tol:
            raise PostconditionError("(E(f) o phi^{-1}) o phi differs from E(f) on {w != 0}")
    return out


def density_mu_sup_w(inst: SystemInstance, *, check: bool = True, tol: float = DEFAULT.abs) -> DensityFunction:
    """Density of ``mu^w o phi^{-1}`` with respect to ``mu`` via ``h * E(1/|w|^2) o phi^{-1}``."""
    h = fiber_mass(inst) / inst.mu
    inv_w2 = np.zeros(inst.n)
    sup = inst.support
    inv_w2[sup] = 1.0 / np.abs(inst.w[sup]) ** 2
    g = cond_expectation_inv(inst, inv_w2, check=check, tol=tol)
    dens = h * g.values
    if check:
        direct = pushforward(make_mu_sup_w(inst), inst.phi).mass / inst.mu
        if deviation(dens, direct) > tol:
            raise PostconditionError("mu^w o phi^{-1} density disagrees with the direct pushforward")
    return DensityFunction(inst.space, dens, "mu")


def _as_pairs(m) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(m, dict):
        t, p = list(m.keys()), list(m.values())
    else:
        pairs = list(m)
        t = [float(a) for a, _ in pairs]
        p = [float(b) for _, b in pairs]
    return np.asarray(t, float), np.asarray(p, float)


def moment(m: Iterable, k: int) -> float:
    t, p = _as_pairs(m)
    return float(np.sum(p * t**k))


def is_dirac_at_zero(m, *, tol: float = DEFAULT.rel, norm_tol: float = DEFAULT.abs) -> bool:
    """Whether a finitely atomic probability measure on [0, inf) is the point mass at 0.

    ``m`` is a ``{t: p}`` mapping or an iterable of ``(t, p)`` pairs. The
    answer is read off the first moment; the equivalence with the support and
    the higher moments is verified on the way.
    """
    t, p = _as_pairs(m)
    if np.any(t < 0) or np.any(p < 0):
        raise PreconditionError("locations and masses must be nonnegative")
    total = float(p.sum())
    if abs(total - 1.0) > norm_tol:
        raise PreconditionError(f"masses sum to {total!r}, not 1")
    first = float(np.sum(p * t))
    charged = p > 0
    at_zero = bool(np.all(t[charged] == 0))
    positive = t[charged & (t > 0)]
    if positive.size and positive.min() < 1e-90:
        # t**3 underflows; the power-moment comparison is meaningless here
        moments_vanish = []
    else:
        moments_vanish = [float(np.sum(p * t**k)) == 0.0 for k in (1, 2, 3)]
    if len({first == 0.0, at_zero, *moments_vanish}) != 1:
        raise PostconditionError("first-moment test disagrees with the support of the measure")
    return first <= tol
