"""Polar decomposition and the quasinormal / hyponormal / normal predicates."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calculus import DensityFunction, cond_expectation
from .errors import PostconditionError
from .operator import L2Vector, WcOperator, _vector, as_operator, f_sub_w
from .space import SystemInstance
from .tolerance import DEFAULT, deviation


def psd_sqrt(m: np.ndarray, *, cutoff: float = 1e-12) -> np.ndarray:
    """Square root of a Hermitian PSD matrix by eigendecomposition.

    Eigenvalues below ``cutoff * max eigenvalue`` are round-off and set to 0.
    """
    m = 0.5 * (m + m.conj().T)
    vals, vecs = np.linalg.eigh(m)
    top = max(float(vals.max(initial=0.0)), 0.0)
    vals = np.where(vals <= cutoff * top, 0.0, vals)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def polar_factor(a: np.ndarray, *, cutoff: float = 1e-12) -> np.ndarray:
    """Partial isometry of the polar decomposition, from the SVD."""
    u, s, vh = np.linalg.svd(a)
    keep = s > cutoff * max(float(s.max(initial=0.0)), 1e-300)
    return u[:, keep] @ vh[keep, :]


@dataclass(frozen=True)
class Verdict:
    """A boolean claim with the numbers that justify it."""

    value: bool
    residual: float = 0.0
    witness: dict | None = None

    def __bool__(self) -> bool:
        return self.value


@dataclass(frozen=True, eq=False)
class PolarParts:
    modulus: DensityFunction
    partial_isometry: WcOperator
    w_tilde: np.ndarray


def polar_decompose(op, *, check: bool = True, tol: float = DEFAULT.oracle) -> PolarParts:
    """``C = U |C|`` with ``|C| = M_{sqrt h}`` and ``U = C_{phi, w~}``, ``w~ = w / sqrt(h o phi)``."""
    op = as_operator(op)
    inst = op.inst
    h = op.h.values
    root = np.sqrt(h)
    sup = inst.support
    w_tilde = np.zeros(inst.n, complex)
    # h(phi(x)) > 0 wherever w(x) != 0
    w_tilde[sup] = inst.w[sup] / root[inst.phi[sup]]
    u_op = WcOperator(SystemInstance(inst.space, inst.phi, w_tilde))
    parts = PolarParts(DensityFunction(inst.space, root, "mu"), u_op, w_tilde)
    if check:
        _check_polar(op, parts, tol)
    return parts


def _check_polar(op: WcOperator, parts: PolarParts, tol: float) -> None:
    a = op.matrix
    u = parts.partial_isometry.matrix
    root = parts.modulus.values
    pos = op.h.values > 0
    if deviation(u @ np.diag(root), a) > tol:
        raise PostconditionError("U |C| does not reproduce C")
    if deviation(u.conj().T @ u, np.diag(pos.astype(float))) > tol:
        raise PostconditionError("U*U is not the projection onto {h > 0}")
    if deviation(psd_sqrt(a.conj().T @ a), np.diag(root)) > tol:
        raise PostconditionError("|C| disagrees with sqrt(A*A)")
    if deviation(u[:, pos], polar_factor(a)[:, pos]) > tol or np.any(u[:, ~pos] != 0):
        raise PostconditionError("U disagrees with the SVD polar factor")


def adjoint_modulus_apply(op, f, *, check: bool = True, tol: float = DEFAULT.oracle) -> L2Vector:
    """``|C*| f = w (h o phi)^{1/2} E(f_w)``."""
    op = as_operator(op)
    f = _vector(op, f)
    inst = op.inst
    e = cond_expectation(inst, f_sub_w(op, f, check=check))
    out = L2Vector(op.space, inst.w * np.sqrt(op.h.values[inst.phi]) * e.values)
    if check:
        a = op.matrix
        oracle = psd_sqrt(a @ a.conj().T) @ f.coords
        if deviation(out.coords, oracle) > tol:
            raise PostconditionError("|C*| formula disagrees with sqrt(AA*)")
    return out


def commutator_residual(a: np.ndarray) -> float:
    """Frobenius norm of ``A|A|^2 - |A|^2 A``."""
    m = a.conj().T @ a
    return float(np.linalg.norm(a @ m - m @ a))


def predicted_commutator(op) -> np.ndarray:
    """``A|A|^2 - |A|^2 A`` from ``h``: the only nonzero entries are ``A[x, phi x] (h(phi x) - h(x))``."""
    a = op.matrix
    h = op.h.values
    rows = np.arange(op.inst.n)
    out = np.zeros_like(a)
    out[rows, op.inst.phi] = a[rows, op.inst.phi] * (h[op.inst.phi] - h)
    return out


def self_commutator(a: np.ndarray) -> np.ndarray:
    d = a.conj().T @ a - a @ a.conj().T
    return 0.5 * (d + d.conj().T)


def _scale(a: np.ndarray, power: int) -> float:
    # the tests below are homogeneous of this degree in A, so thresholds scale with ||A||
    return float(np.linalg.norm(a, 2)) ** power


def is_quasinormal(op, *, check: bool = True, rel: float = DEFAULT.rel, tol: float = DEFAULT.oracle) -> Verdict:
    """Quasinormal iff ``h o phi = h`` on ``{w != 0}``; cross-checked with ``Q|Q|^2 = |Q|^2 Q``."""
    op = as_operator(op)
    inst = op.inst
    h = op.h.values
    sup = np.flatnonzero(inst.support)
    lhs, rhs = h[inst.phi[sup]], h[sup]
    gap = np.abs(lhs - rhs)
    bad = gap > rel * np.maximum(np.abs(lhs), np.abs(rhs))
    witness = None
    if np.any(bad):
        k = int(np.argmax(bad))
        x = int(sup[k])
        witness = {
            "atom": inst.space.atoms[x],
            "h_phi_x": float(lhs[k]),
            "h_x": float(rhs[k]),
            "w_x": [float(inst.w[x].real), float(inst.w[x].imag)],
            "gap": float(gap[k]),
        }
    value = not bool(np.any(bad))
    residual = float(gap.max(initial=0.0))
    if check:
        # compare entrywise: a bare norm threshold cannot separate a small but genuine
        # commutator (tiny weights next to large ones) from round-off
        a = op.matrix
        m = a.conj().T @ a
        dev = float(np.linalg.norm(a @ m - m @ a - predicted_commutator(op)))
        if dev > tol * _scale(a, 3) or (value and commutator_residual(a) > tol * _scale(a, 3)):
            raise PostconditionError(
                f"quasinormality: h-test says {value} but commutator deviates from prediction by {dev:.3e}"
            )
    return Verdict(value, residual, witness)


def is_hyponormal(op, *, check: bool = True, tol: float = DEFAULT.psd) -> Verdict:
    """``A*A - AA*`` positive semidefinite (up to ``-tol``)."""
    op = as_operator(op)
    a = op.matrix
    lam = float(np.linalg.eigvalsh(self_commutator(a)).min())
    value = lam >= -tol * _scale(a, 2)
    inst = op.inst
    gap = np.flatnonzero(inst.support & (op.h.values == 0))
    witness = {"min_eigenvalue": lam}
    if gap.size:
        witness["h_zero_on_support"] = inst.space.atoms[int(gap[0])]
    if check and value and gap.size:
        raise PostconditionError("hyponormal operator with h = 0 on {w != 0}")
    return Verdict(value, max(0.0, -lam), None if value else witness)


def is_normal(op, *, tol: float = DEFAULT.oracle) -> Verdict:
    op = as_operator(op)
    a = op.matrix
    res = float(np.linalg.norm(a.conj().T @ a - a @ a.conj().T))
    return Verdict(res <= tol * _scale(a, 2), res, None)


HSFD_CONDITIONS = (
    "support_kernel_trivial",
    "no_mass_on_h0_and_support",
    "h_positive_on_support",
    "h0_indicator_invariant",
    "support_kernel_in_adjoint_kernel",
)


@dataclass(frozen=True)
class InjectivityReport:
    conditions: dict
    witness: dict | None = None

    @property
    def value(self) -> bool:
        return all(self.conditions.values())

    @property
    def agree(self) -> bool:
        return len(set(self.conditions.values())) == 1


def injectivity_report(op, *, check: bool = True, tol: float = DEFAULT.oracle) -> InjectivityReport:
    """The five equivalent conditions for triviality of ``chi_{w != 0} N(C)``.

    The two kernel conditions are evaluated on the SVD null space of the
    matrix, the other three directly on ``h``; all five must agree.
    """
    op = as_operator(op)
    inst = op.inst
    h = op.h.values
    sup = inst.support
    a = op.matrix
    _, s, vh = np.linalg.svd(a)
    null = vh[s <= tol * float(s.max(initial=0.0)), :].conj().T
    projected = null * sup[:, None]
    cond = {
        "support_kernel_trivial": float(np.linalg.norm(projected)) <= tol,
        "no_mass_on_h0_and_support": float(inst.mu[(h == 0) & sup].sum()) == 0.0,
        "h_positive_on_support": bool(np.all(h[sup] > 0)),
        "h0_indicator_invariant": bool(np.all((h[sup] == 0) == (h[inst.phi[sup]] == 0))),
        "support_kernel_in_adjoint_kernel": float(np.linalg.norm(a.conj().T @ projected)) <= tol * _scale(a, 1),
    }
    bad = np.flatnonzero(sup & (h == 0))
    witness = {"atom": inst.space.atoms[int(bad[0])]} if bad.size else None
    rep = InjectivityReport(cond, witness)
    if check and not rep.agree:
        raise PostconditionError(f"injectivity conditions split: {cond}")
    return rep


@dataclass(frozen=True)
class Classification:
    quasinormal: bool
    hyponormal: bool
    normal: bool
    injective_on_support: bool
    witnesses: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)


def classify(op, *, check: bool = True) -> Classification:
    op = as_operator(op)
    q = is_quasinormal(op, check=check)
    hy = is_hyponormal(op, check=check)
    nm = is_normal(op)
    inj = injectivity_report(op, check=check)
    if (nm.value and not q.value) or (q.value and not hy.value):
        raise PostconditionError("normal => quasinormal => hyponormal violated")
    witnesses = {}
    if q.witness:
        witnesses["quasinormal"] = q.witness
    if hy.witness:
        witnesses["hyponormal"] = hy.witness
    if inj.witness:
        witnesses["injective_on_support"] = inj.witness
    return Classification(
        quasinormal=q.value,
        hyponormal=hy.value,
        normal=nm.value,
        injective_on_support=inj.value,
        witnesses=witnesses,
        residuals={
            "quasinormal_h_gap": q.residual,
            "hyponormal_negative_eigenvalue": hy.residual,
            "normal_commutator": nm.residual,
        },
    )
