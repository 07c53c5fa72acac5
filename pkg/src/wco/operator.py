"""The weighted composition operator ``f -> w * (f o phi)`` and its dense-matrix oracle.

Matrices use the orthonormal basis ``e_x = chi_{x} / sqrt(mu(x))`` in the
declared atom order, so ``coords(f) = f * sqrt(mu)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .calculus import (
    DensityFunction,
    compute_h,
    cond_expectation,
    cond_expectation_inv,
    values_of,
)
from .errors import PostconditionError, PreconditionError, SpaceMismatchError
from .space import (
    MeasureSpace,
    SystemInstance,
    base_measure,
    is_absolutely_continuous,
    make_mu_w,
    pushforward,
)
from .tolerance import DEFAULT, deviation


@dataclass(frozen=True, eq=False)
class L2Vector:
    """An element of ``L^2(mu)`` given by its values on the atoms."""

    space: MeasureSpace
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (len(self.space),):
            raise SpaceMismatchError("vector length does not match the atom count")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_coords(cls, space: MeasureSpace, coords) -> "L2Vector":
        return cls(space, np.asarray(coords, dtype=complex) / np.sqrt(space.mass))

    @property
    def coords(self) -> np.ndarray:
        return self.coeffs * np.sqrt(self.space.mass)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2 * self.space.mass)))

    def inner(self, other: "L2Vector") -> complex:
        """``<self, other>``, linear in the first slot."""
        self.space.require_same(other.space)
        return complex(np.sum(self.coeffs * np.conj(other.coeffs) * self.space.mass))


def basis_vector(space: MeasureSpace, i: int) -> L2Vector:
    c = np.zeros(len(space), complex)
    c[i] = 1.0 / np.sqrt(space.mass[i])
    return L2Vector(space, c)


@dataclass(frozen=True, eq=False)
class WcOperator:
    """``C_{phi,w}`` on ``L^2(mu)`` with its Radon-Nikodym derivative cached."""

    inst: SystemInstance
    h: DensityFunction = field(init=False)
    well_defined: bool = field(init=False)
    densely_defined: bool = field(init=False)

    def __post_init__(self):
        h = compute_h(self.inst)
        push = pushforward(make_mu_w(self.inst), self.inst.phi)
        well = is_absolutely_continuous(push, base_measure(self.inst.space))
        dense = bool(np.all(np.isfinite(h.values)))
        # positive atom masses make both automatic; a failure means corrupted input
        if not (well and dense):
            raise PostconditionError("operator is not well-defined and densely defined")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "well_defined", well)
        object.__setattr__(self, "densely_defined", dense)

    @property
    def space(self) -> MeasureSpace:
        return self.inst.space

    @cached_property
    def matrix(self) -> np.ndarray:
        return to_matrix(self)

    def __call__(self, f) -> L2Vector:
        return apply(self, f)


def as_operator(obj) -> WcOperator:
    return obj if isinstance(obj, WcOperator) else WcOperator(obj)


def _vector(op: WcOperator, f) -> L2Vector:
    if isinstance(f, L2Vector):
        op.space.require_same(f.space)
        return f
    return L2Vector(op.space, values_of(f, len(op.space)))


def apply(op: WcOperator, f, *, check: bool = True, tol: float = DEFAULT.abs) -> L2Vector:
    """``(Cf)(x) = w(x) f(phi(x))``."""
    op = as_operator(op)
    f = _vector(op, f)
    inst = op.inst
    out = L2Vector(op.space, inst.w * f.coeffs[inst.phi])
    if check:
        graph = f.norm() ** 2 + out.norm() ** 2
        direct = float(np.sum(np.abs(f.coeffs) ** 2 * (1 + op.h.values) * inst.mu))
        if deviation(graph, direct) > tol:
            raise PostconditionError(f"graph norm identity fails: {graph} vs {direct}")
    return out


def to_matrix(op: WcOperator, *, check: bool = True, tol: float = DEFAULT.abs) -> np.ndarray:
    """Coordinate matrix ``A[x, y] = w(x) [phi(x) = y] sqrt(mu(x) / mu(y))``."""
    op = as_operator(op)
    inst = op.inst
    n = inst.n
    a = np.zeros((n, n), complex)
    rows = np.arange(n)
    a[rows, inst.phi] = inst.w * np.sqrt(inst.mu / inst.mu[inst.phi])
    if check:
        rng = np.random.default_rng(n)
        coords = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        f = L2Vector.from_coords(op.space, coords)
        if deviation(a @ coords, apply(op, f, check=False).coords) > tol:
            raise PostconditionError("matrix does not represent the operator")
    return a


def singular_values(a: np.ndarray) -> np.ndarray:
    return np.linalg.svd(a, compute_uv=False)


def operator_norm(op: WcOperator, *, check: bool = True, tol: float = DEFAULT.abs) -> float:
    """``||C|| = max sqrt(h)`` (bounded, everywhere defined on a finite space)."""
    op = as_operator(op)
    value = float(np.sqrt(op.h.values.max()))
    if check:
        top = float(singular_values(op.matrix).max())
        if abs(top - value) > tol * max(1.0, value):
            raise PostconditionError(f"norm {value} disagrees with top singular value {top}")
    return value


def kernel_basis(op: WcOperator, *, check: bool = True, tol: float = DEFAULT.abs) -> list[L2Vector]:
    """Orthonormal basis ``{e_x : h(x) = 0}`` of the kernel."""
    op = as_operator(op)
    zero = np.flatnonzero(op.h.values == 0)
    basis = [basis_vector(op.space, int(i)) for i in zero]
    if check:
        for e in basis:
            if apply(op, e, check=False).norm() > tol:
                raise PostconditionError("kernel vector is not annihilated")
        sv = singular_values(op.matrix)
        nullity = int(np.sum(sv <= tol * sv.max()))
        if nullity != len(basis):
            raise PostconditionError(f"kernel dimension {len(basis)} but SVD nullity {nullity}")
    return basis


def norm_mu_w(inst: SystemInstance, values) -> float:
    values = values_of(values, inst.n)
    return float(np.sqrt(np.sum(np.abs(values) ** 2 * np.abs(inst.w) ** 2 * inst.mu)))


def f_sub_w(op: WcOperator, f, *, check: bool = True, tol: float = DEFAULT.abs) -> DensityFunction:
    """``f_w = chi_{w != 0} f / w`` as an element of ``L^2(mu_w)``."""
    op = as_operator(op)
    f = _vector(op, f)
    inst = op.inst
    sup = inst.support
    out = np.zeros(inst.n, complex)
    out[sup] = f.coeffs[sup] / inst.w[sup]
    fw = DensityFunction(op.space, out, "mu_w", ~sup)
    if check:
        lhs, rhs = norm_mu_w(inst, out), f.norm()
        if lhs > rhs + tol * max(1.0, rhs):
            raise PostconditionError(f"f -> f_w is not contractive: {lhs} > {rhs}")
    return fw


def adjoint_apply(op: WcOperator, f, *, check: bool = True, tol: float = DEFAULT.abs) -> L2Vector:
    """``C* f = h * (E(f_w) o phi^{-1})``."""
    op = as_operator(op)
    f = _vector(op, f)
    fw = f_sub_w(op, f, check=check)
    g = cond_expectation_inv(op.inst, fw, check=check)
    out = L2Vector(op.space, op.h.values * g.values)
    if check:
        oracle = op.matrix.conj().T @ f.coords
        if deviation(out.coords, oracle) > tol:
            raise PostconditionError("adjoint formula disagrees with the conjugate transpose")
    return out


def power_weight(inst: SystemInstance, n: int, *, check: bool = True, tol: float = DEFAULT.abs) -> SystemInstance:
    """Return ``(phi^n, w_n)`` with ``w_0 = 1`` and ``w_n = prod_{j<n} w o phi^j``."""
    if n < 0:
        raise PreconditionError("power must be nonnegative")
    phi_k = np.arange(inst.n)
    w_k = np.ones(inst.n, complex)
    for _ in range(n):
        w_k = w_k * inst.w[phi_k]
        phi_k = inst.phi[phi_k]
    out = SystemInstance(inst.space, phi_k, w_k)
    if check:
        a = to_matrix(WcOperator(inst), check=False)
        power = np.linalg.matrix_power(a, n)
        if deviation(to_matrix(WcOperator(out), check=False), power) > tol:
            raise PostconditionError(f"matrix of (phi^{n}, w_{n}) is not the {n}-th power")
    return out


def h_n_recurrence(inst: SystemInstance, n: int) -> np.ndarray:
    """``h_0 = 1``, ``h_{k+1} = (E(h_k) o phi^{-1}) h``."""
    h = compute_h(inst).values
    hk = np.ones(inst.n)
    for _ in range(n):
        hk = cond_expectation_inv(inst, hk, check=False).values.real * h
    return hk


def h_n(inst: SystemInstance, n: int, *, check: bool = True, tol: float = DEFAULT.abs) -> DensityFunction:
    """Radon-Nikodym derivative attached to ``C_{phi^n, w_n}``.

    Computed directly from the power instance and, when ``check`` is set,
    compared atomwise with the conditional-expectation recurrence.
    """
    direct = compute_h(power_weight(inst, n, check=check, tol=tol))
    if check:
        rec = h_n_recurrence(inst, n)
        if deviation(direct.values, rec) > tol:
            raise PostconditionError(f"h_{n}: direct and recurrence routes disagree")
    return direct
