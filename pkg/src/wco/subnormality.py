"""Consistency condition, the quasinormal product extension, and subnormality certificates.

A family ``P`` assigns to every atom x a finitely atomic probability measure
``P(x, .)`` on ``[0, inf)``. All measures are atomic, so every condition
quantified over Borel sets sigma is checked on the singletons of the union
of all locations: equality there implies equality on every Borel set.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .calculus import compute_h, cond_expectation, cond_expectation_inv, is_dirac_at_zero
from .errors import ExtensionError, PostconditionError, PreconditionError, SpaceMismatchError
from .operator import L2Vector, WcOperator, h_n
from .simplex import phase_one
from .space import MeasureSpace, SystemInstance
from .structure import is_normal, is_quasinormal
from .tolerance import DEFAULT, deviation

N_MAX = 6
MOMENT_TOL = 1e-9


def merge_locations(values, tol: float = DEFAULT.merge) -> tuple[np.ndarray, np.ndarray]:
    """Cluster nearly equal locations.

    Returns the sorted representatives and, for each input value, the index
    of its representative. Consecutive sorted values within
    ``tol * max(1, t)`` of the cluster's first element share a cluster.
    """
    values = np.asarray(values, float)
    if values.size == 0:
        return np.zeros(0), np.zeros(0, np.intp)
    order = np.argsort(values, kind="stable")
    reps: list[float] = []
    label = np.empty(values.size, np.intp)
    for k in order:
        t = values[k]
        if not reps or t - reps[-1] > tol * max(1.0, abs(t)):
            reps.append(float(t))
        label[k] = len(reps) - 1
    return np.array(reps), label


@dataclass(frozen=True, eq=False)
class ProbabilityFamily:
    """``P(x, .)`` for every atom x, stored on a shared set of locations.

    ``masses[x, k]`` is ``P(x, {locations[k]})``. Zero masses are dropped from
    the per-atom view; locations closer than the merge tolerance are merged
    across the whole family so that singleton tests see one location.
    """

    space: MeasureSpace
    locations: np.ndarray
    masses: np.ndarray

    @classmethod
    def from_measures(
        cls,
        space: MeasureSpace,
        measures: Mapping[str, Iterable] | Sequence[Iterable],
        *,
        norm_tol: float = DEFAULT.rel,
        merge_tol: float = DEFAULT.merge,
    ) -> "ProbabilityFamily":
        if isinstance(measures, Mapping):
            unknown = [a for a in measures if a not in space.atoms]
            if unknown:
                raise ValueError(f"family refers to unknown atoms: {unknown}")
            missing = [a for a in space.atoms if a not in measures]
            if missing:
                raise ValueError(f"family lacks a measure for atoms: {missing}")
            per_atom = [list(_pairs(measures[a])) for a in space.atoms]
        else:
            per_atom = [list(_pairs(m)) for m in measures]
            if len(per_atom) != len(space):
                raise SpaceMismatchError("family and space have different atom counts")
        flat_t, flat_p, owner = [], [], []
        for i, pairs in enumerate(per_atom):
            for t, p in pairs:
                if not (np.isfinite(t) and t >= 0):
                    raise ValueError(f"atom {space.atoms[i]!r}: location {t!r} is not in [0, inf)")
                if not (np.isfinite(p) and 0 <= p <= 1 + norm_tol):
                    raise ValueError(f"atom {space.atoms[i]!r}: mass {p!r} is not in [0, 1]")
                if p > 0:
                    flat_t.append(t)
                    flat_p.append(p)
                    owner.append(i)
        locs, label = merge_locations(flat_t, merge_tol)
        masses = np.zeros((len(space), locs.size))
        np.add.at(masses, (np.asarray(owner, np.intp), label), np.asarray(flat_p))
        totals = masses.sum(axis=1)
        bad = np.flatnonzero(np.abs(totals - 1.0) > norm_tol)
        if bad.size:
            i = int(bad[0])
            raise ValueError(f"atom {space.atoms[i]!r}: masses sum to {totals[i]!r}, not 1")
        return cls(space, locs, masses)

    @classmethod
    def dirac(cls, space: MeasureSpace, points) -> "ProbabilityFamily":
        """``P(x, .) = delta_{points[x]}``."""
        points = np.asarray(points, float)
        return cls.from_measures(space, [[(float(t), 1.0)] for t in points])

    def __post_init__(self):
        locs = np.asarray(self.locations, float)
        m = np.asarray(self.masses, float)
        if m.shape != (len(self.space), locs.size):
            raise ValueError("masses must be an atoms x locations array")
        if np.any(np.diff(locs) <= 0):
            raise ValueError("locations must be strictly increasing")
        if np.any(locs < 0) or np.any(m < 0):
            raise ValueError("locations and masses must be nonnegative")
        for arr, name in ((locs, "locations"), (m, "masses")):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def measure(self, x) -> list[tuple[float, float]]:
        i = self.space.index(x) if isinstance(x, str) else int(x)
        row = self.masses[i]
        return [(float(t), float(p)) for t, p in zip(self.locations, row) if p > 0]

    def moments(self, k: int) -> np.ndarray:
        return self.masses @ self.locations**k

    def as_dict(self) -> dict:
        return {a: self.measure(i) for i, a in enumerate(self.space.atoms)}


def _pairs(m) -> Iterable[tuple[float, float]]:
    if isinstance(m, Mapping):
        if "t" in m and "p" in m:
            yield float(m["t"]), float(m["p"])
            return
        for t, p in m.items():
            yield float(t), float(p)
        return
    for item in m:
        if isinstance(item, Mapping):
            yield float(item["t"]), float(item["p"])
        else:
            t, p = item
            yield float(t), float(p)


def _require(inst: SystemInstance, fam: ProbabilityFamily) -> None:
    if not inst.space.same_as(fam.space):
        raise SpaceMismatchError("family and instance live on different spaces")


# --------------------------------------------------------------------------
# consistency condition


@dataclass(frozen=True)
class CcReport:
    variant: str
    satisfied: bool
    max_residual: float
    tolerance: float
    atoms: tuple[str, ...]          # tested atoms, rows of ``residuals``
    locations: np.ndarray
    residuals: np.ndarray           # |LHS - RHS| per (tested atom, location)
    main1_battery: dict | None = None
    implications: dict | None = None

    def residual_table(self) -> list[dict]:
        return [
            {"atom": a, "t": float(t), "residual": float(self.residuals[i, k])}
            for i, a in enumerate(self.atoms)
            for k, t in enumerate(self.locations)
        ]

    def worst(self) -> dict | None:
        if self.residuals.size == 0:
            return None
        i, k = np.unravel_index(int(np.argmax(self.residuals)), self.residuals.shape)
        return {"atom": self.atoms[i], "t": float(self.locations[k]),
                "residual": float(self.residuals[i, k])}


def _cc_sides(inst: SystemInstance, fam: ProbabilityFamily):
    """Both sides of CC on every atom (rows) and location (columns)."""
    h = compute_h(inst).values
    t = fam.locations
    lhs = np.column_stack([cond_expectation(inst, fam.masses[:, k]).values.real
                           for k in range(t.size)]) if t.size else np.zeros((inst.n, 0))
    z = inst.phi
    with np.errstate(divide="ignore", invalid="ignore"):
        rhs = np.where(h[z][:, None] > 0, t[None, :] * fam.masses[z] / h[z][:, None], np.nan)
    return lhs, rhs


def _cc1_sides(inst: SystemInstance, fam: ProbabilityFamily):
    h = compute_h(inst).values
    t = fam.locations
    cols = [cond_expectation_inv(inst, fam.masses[:, k]).values.real * h for k in range(t.size)]
    lhs = np.column_stack(cols) if cols else np.zeros((inst.n, 0))
    rhs = t[None, :] * fam.masses
    return lhs, rhs


def _report(variant, inst, rows, lhs, rhs, fam, tol) -> CcReport:
    res = np.abs(lhs[rows] - rhs[rows])
    worst = float(np.nanmax(res, initial=0.0)) if res.size else 0.0
    if np.isnan(res).any():
        worst = float("inf")
    return CcReport(
        variant=variant,
        satisfied=worst <= tol,
        max_residual=worst,
        tolerance=tol,
        atoms=tuple(inst.space.atoms[i] for i in np.flatnonzero(rows)),
        locations=fam.locations,
        residuals=res,
    )


def verify_cc(inst: SystemInstance, fam: ProbabilityFamily, *, tol: float = DEFAULT.abs) -> CcReport:
    """Check ``E(P(., {t}))(x) = t P(phi(x), {t}) / h(phi(x))`` on ``{w != 0}``."""
    _require(inst, fam)
    lhs, rhs = _cc_sides(inst, fam)
    return _report("CC", inst, inst.support, lhs, rhs, fam, tol)


def verify_cc1(inst: SystemInstance, fam: ProbabilityFamily, *, tol: float = DEFAULT.abs) -> CcReport:
    """Check ``(E(P(., {t})) o phi^{-1})(x) h(x) = t P(x, {t})`` on ``{w != 0}``.

    The report also records both one-way bridges between the two variants
    and raises if a bridge's hypotheses hold but its conclusion does not.
    """
    _require(inst, fam)
    lhs, rhs = _cc1_sides(inst, fam)
    rep = _report("CC-1", inst, inst.support, lhs, rhs, fam, tol)
    cc = verify_cc(inst, fam, tol=tol)
    h = compute_h(inst).values
    sup = inst.support

    off = (h > 0) & ~sup
    extra = np.abs(lhs[off] - rhs[off])
    extra_ok = bool(np.all(extra <= tol))
    first = fam.moments(1)
    null_first_ok = bool(np.all(first[(h == 0) & sup] <= tol))

    bridge_1 = {"hypothesis": rep.satisfied and extra_ok, "conclusion": cc.satisfied}
    bridge_2 = {"hypothesis": cc.satisfied and null_first_ok, "conclusion": rep.satisfied}
    for name, b in (("cc1_to_cc", bridge_1), ("cc_to_cc1", bridge_2)):
        if b["hypothesis"] and not b["conclusion"]:
            raise PostconditionError(f"{name}: hypotheses hold but the conclusion fails")
    return replace(rep, implications={"cc1_to_cc": bridge_1, "cc_to_cc1": bridge_2})


# --------------------------------------------------------------------------
# product space


@dataclass(frozen=True, eq=False)
class ExtensionSystem:
    """``C_{Phi,W}`` on ``X x [0, inf)`` with ``rho({(x,t)}) = mu(x) P(x,{t})``.

    ``pairs[k] = (x, t)`` names product atom k. ``redirected`` lists product
    atoms with ``W = 0`` whose image under Phi is rho-null; Phi is sent to
    the atom itself there, which changes nothing since ``W = 0``.
    """

    base: SystemInstance
    family: ProbabilityFamily
    instance: SystemInstance
    pairs: tuple[tuple[int, float], ...]
    embedding: tuple[np.ndarray, ...]
    redirected: tuple[tuple[str, float], ...]

    @property
    def operator(self) -> WcOperator:
        return WcOperator(self.instance)

    def embed(self, f) -> L2Vector:
        """``(Uf)(x, t) = f(x)``."""
        coeffs = f.coeffs if isinstance(f, L2Vector) else np.asarray(f, complex)
        owner = np.array([x for x, _ in self.pairs], np.intp)
        return L2Vector(self.instance.space, coeffs[owner])

    def embedding_matrix(self) -> np.ndarray:
        """Coordinates of U in the orthonormal bases: entry ``sqrt(P(x, {t}))``."""
        u = np.zeros((len(self.pairs), self.base.n))
        mu = self.base.mu
        rho = self.instance.mu
        for k, (x, _) in enumerate(self.pairs):
            u[k, x] = np.sqrt(rho[k] / mu[x])
        return u


def _product(inst: SystemInstance, fam: ProbabilityFamily):
    """Kept product atoms, their masses and Phi, plus the Phi-images that are rho-null."""
    xs, ks = np.nonzero(fam.masses > 0)
    index = {(int(x), int(k)): j for j, (x, k) in enumerate(zip(xs, ks))}
    rho = inst.mu[xs] * fam.masses[xs, ks]
    phi = np.empty(xs.size, np.intp)
    violations, redirected = [], []
    for j, (x, k) in enumerate(zip(xs, ks)):
        target = index.get((int(inst.phi[x]), int(k)))
        if target is None:
            t = float(fam.locations[k])
            name = (inst.space.atoms[x], t)
            if inst.w[x] != 0:
                violations.append({"atom": name[0], "t": t,
                                   "image": inst.space.atoms[inst.phi[x]]})
            else:
                redirected.append(name)
            target = j
        phi[j] = target
    return xs, ks, rho, phi, violations, redirected


def _pair_label(atom: str, t: float) -> str:
    return f"{atom}@{t!r}"


def product_system(inst: SystemInstance, fam: ProbabilityFamily):
    """Return ``(extension_or_None, violations)`` without raising."""
    _require(inst, fam)
    xs, ks, rho, phi, violations, redirected = _product(inst, fam)
    if violations:
        return None, violations
    space = MeasureSpace(tuple(_pair_label(inst.space.atoms[x], float(fam.locations[k]))
                               for x, k in zip(xs, ks)), rho)
    prod = SystemInstance(space, phi, inst.w[xs])
    pairs = tuple((int(x), float(fam.locations[k])) for x, k in zip(xs, ks))
    embedding = tuple(np.flatnonzero(xs == i) for i in range(inst.n))
    return ExtensionSystem(inst, fam, prod, pairs, embedding, tuple(redirected)), []


def intertwining_residual(ext: ExtensionSystem) -> float:
    """``max |U C - C_{Phi,W} U|`` over basis vectors, in coordinates."""
    u = ext.embedding_matrix()
    a = WcOperator(ext.base).matrix
    b = ext.operator.matrix
    return float(np.max(np.abs(u @ a - b @ u), initial=0.0))


def isometry_residual(ext: ExtensionSystem) -> float:
    u = ext.embedding_matrix()
    return float(np.max(np.abs(u.T @ u - np.eye(ext.base.n)), initial=0.0))


def product_h(ext: ExtensionSystem) -> np.ndarray:
    return compute_h(ext.instance).values


def build_extension(
    inst: SystemInstance, fam: ProbabilityFamily, *, check: bool = True, tol: float = DEFAULT.abs
) -> ExtensionSystem:
    """Construct ``(X x R_+, rho, Phi, W)`` and the embedding ``U``.

    Raises :class:`ExtensionError` when ``rho_W o Phi^{-1}`` is not
    absolutely continuous with respect to ``rho``.
    """
    ext, violations = product_system(inst, fam)
    if ext is None:
        raise ExtensionError(
            "rho_W o Phi^{-1} is not absolutely continuous w.r.t. rho", violations
        )
    if check:
        if isometry_residual(ext) > tol:
            raise PostconditionError("embedding U is not isometric")
        if intertwining_residual(ext) > tol:
            raise PostconditionError("U C != C_{Phi,W} U")
        if verify_cc(inst, fam, tol=tol).satisfied:
            h = compute_h(inst).values
            big_h = product_h(ext)
            expected = np.array([t if h[x] > 0 else 0.0 for x, t in ext.pairs])
            if deviation(big_h, expected) > tol:
                raise PostconditionError("H(x,t) != chi_{h>0}(x) t under CC")
            if np.all(h[inst.support] > 0) and not is_quasinormal(ext.operator):
                raise PostconditionError("extension of a CC family is not quasinormal")
    return ext


# --------------------------------------------------------------------------
# equivalence batteries


def lemma_cc_equivalences(inst: SystemInstance, fam: ProbabilityFamily, *, tol: float = DEFAULT.abs) -> dict:
    """Four equivalent formulations of CC, each evaluated on its own terms."""
    _require(inst, fam)
    h = compute_h(inst).values
    pos = h > 0
    t = fam.locations

    lhs1, rhs1 = _cc1_sides(inst, fam)
    ii = bool(np.all(np.abs(lhs1 - pos[:, None] * rhs1) <= tol))

    ext, _ = product_system(inst, fam)
    iii = iv = False
    if ext is not None:
        big_h = product_h(ext)
        expected = np.array([tt if pos[x] else 0.0 for x, tt in ext.pairs])
        iii = deviation(big_h, expected) <= tol
        hp = np.zeros_like(fam.masses)
        for j, (x, _) in enumerate(ext.pairs):
            k = int(np.searchsorted(t, ext.pairs[j][1]))
            hp[x, k] = big_h[j] * fam.masses[x, k]
        z = inst.phi[inst.support]
        lhs4 = hp[z]
        rhs4 = t[None, :] * fam.masses[z]
        iv = bool(np.all(np.abs(lhs4 - rhs4) <= tol * np.maximum(1.0, np.abs(rhs4))))
    return {
        "cc": verify_cc(inst, fam, tol=tol).satisfied,
        "cc_composed": ii,
        "product_derivative": bool(iii),
        "product_moments": bool(iv),
    }


def _moment_deviation(inst: SystemInstance, fam: ProbabilityFamily, n_max: int) -> np.ndarray:
    """Scaled ``|h_n(x) - int t^n P(x, dt)|`` for n = 0..n_max on ``{w != 0}``."""
    sup = inst.support
    out = np.zeros(n_max + 1)
    for n in range(n_max + 1):
        hn = h_n(inst, n).values[sup]
        mom = fam.moments(n)[sup]
        if hn.size:
            out[n] = float(np.max(np.abs(hn - mom) / np.maximum(1.0, np.abs(hn))))
    return out


MAIN1_CONDITIONS = (
    "cc1",
    "moments",
    "first_moment_zero_on_h0",
    "dirac_zero_on_h0",
    "product_derivative_is_t",
    "product_derivative_invariant",
    "h_positive_on_support",
)


def main1_battery(
    inst: SystemInstance, fam: ProbabilityFamily, *, n_max: int = N_MAX, tol: float = DEFAULT.abs
) -> CcReport:
    """Seven conditions that are equivalent once P satisfies CC.

    Each is computed independently; a split verdict raises.
    """
    cc = verify_cc(inst, fam, tol=tol)
    if not cc.satisfied:
        raise PreconditionError(f"family violates CC (max residual {cc.max_residual:.3e})")
    h = compute_h(inst).values
    sup = inst.support
    null_sup = np.flatnonzero(sup & (h == 0))
    first = fam.moments(1)

    ext, _ = product_system(inst, fam)
    v = vi = False
    if ext is not None:
        big_h = product_h(ext)
        charged = np.array([inst.w[x] != 0 for x, _ in ext.pairs], bool)
        ts = np.array([t for _, t in ext.pairs])
        v = deviation(big_h[charged], ts[charged]) <= tol
        vi = deviation(big_h[ext.instance.phi][charged], big_h[charged]) <= tol

    battery = {
        "cc1": verify_cc1(inst, fam, tol=tol).satisfied,
        "moments": bool(np.all(_moment_deviation(inst, fam, n_max) <= MOMENT_TOL)),
        "first_moment_zero_on_h0": bool(np.all(first[null_sup] <= tol)),
        "dirac_zero_on_h0": all(is_dirac_at_zero(fam.measure(int(x))) for x in null_sup),
        "product_derivative_is_t": bool(v),
        "product_derivative_invariant": bool(vi),
        "h_positive_on_support": null_sup.size == 0,
    }
    if len(set(battery.values())) != 1:
        raise PostconditionError(f"main battery split under CC: {battery}")
    return replace(cc, main1_battery=battery)


@dataclass(frozen=True)
class MomentReport:
    passed: bool
    n_max: int
    deviations: np.ndarray  # scaled, per n

    @property
    def max_deviation(self) -> float:
        return float(self.deviations.max(initial=0.0))


def moments_check(
    inst: SystemInstance,
    fam: ProbabilityFamily,
    n_max: int = N_MAX,
    *,
    tol: float = MOMENT_TOL,
    cc_tol: float = DEFAULT.abs,
) -> MomentReport:
    """``h_n(x) = int t^n P(x, dt)`` on ``{w != 0}`` for n = 0..n_max."""
    cc = verify_cc(inst, fam, tol=cc_tol)
    if not cc.satisfied:
        raise PreconditionError("moments_check needs a family satisfying CC")
    h = compute_h(inst).values
    if np.any(h[inst.support] == 0):
        raise PreconditionError("moments_check needs h > 0 on {w != 0}")
    dev = _moment_deviation(inst, fam, n_max)
    return MomentReport(bool(np.all(dev <= tol)), n_max, dev)


# --------------------------------------------------------------------------
# feasibility search


@dataclass(frozen=True)
class CcSolution:
    feasible: bool
    family: ProbabilityFamily | None
    grid: np.ndarray
    residual: float          # CC residual of the family, or phase-one infeasibility
    certifying: bool
    iterations: int = 0

    def __bool__(self) -> bool:
        return self.feasible


def cc_constraints(inst: SystemInstance, grid: np.ndarray, *, certifying: bool = True):
    """Linear system in the unknowns ``p[x, k] = P(x, {grid[k]})`` (row-major).

    Rows: normalization per atom, then one row per (z, k) with
    ``sum_{phi(y)=z} |w(y)|^2 mu(y) p[y,k] - grid[k] mu(z) p[z,k] = 0``,
    for z in ``phi({w != 0})`` (CC); with ``certifying`` also for z in
    ``{w != 0}`` (CC-1), which together force ``h > 0`` on ``{w != 0}``.
    """
    n, g = inst.n, grid.size
    weights = np.abs(inst.w) ** 2 * inst.mu
    targets = set(int(z) for z in inst.phi[inst.support])
    if certifying:
        targets |= set(int(x) for x in np.flatnonzero(inst.support))
    rows, rhs = [], []
    for x in range(n):
        r = np.zeros(n * g)
        r[x * g:(x + 1) * g] = 1.0
        rows.append(r)
        rhs.append(1.0)
    for z in sorted(targets):
        pre = np.flatnonzero(inst.phi == z)
        for k in range(g):
            r = np.zeros(n * g)
            r[pre * g + k] += weights[pre]
            r[z * g + k] -= grid[k] * inst.mu[z]
            if np.any(r != 0):
                rows.append(r)
                rhs.append(0.0)
    return np.array(rows), np.array(rhs)


def solve_cc(
    inst: SystemInstance,
    grid,
    *,
    certifying: bool = True,
    tol: float = DEFAULT.solver,
) -> CcSolution:
    """Search for a family supported on ``grid`` that satisfies CC.

    With ``certifying=True`` (default) the family must also satisfy CC-1 on
    ``{w != 0}``; such a family is exactly what certifies subnormality.
    With ``certifying=False`` only CC itself is imposed.
    """
    grid = np.asarray(grid, float).ravel()
    if grid.size == 0:
        raise PreconditionError("grid must be nonempty")
    if np.any(grid < 0) or not np.all(np.isfinite(grid)):
        raise PreconditionError("grid locations must be finite and >= 0")
    grid, _ = merge_locations(grid)
    a, b = cc_constraints(inst, grid, certifying=certifying)
    n, g = inst.n, grid.size
    # atoms absent from every CC row only need normalizing: fix them at grid[0]
    coupled = np.any(a[n:].reshape(-1, n, g) != 0, axis=(0, 2))
    cols = np.repeat(coupled, g)
    rows = np.concatenate([coupled, np.ones(a.shape[0] - n, bool)])
    res = phase_one(a[np.ix_(rows, cols)], b[rows])
    if not res.feasible:
        return CcSolution(False, None, grid, res.infeasibility, certifying, res.iterations)

    p = np.zeros((n, g))
    p[~coupled, 0] = 1.0
    p[coupled] = np.clip(res.x.reshape(-1, g), 0.0, None)
    p[p < 1e-14] = 0.0
    p /= p.sum(axis=1, keepdims=True)
    fam = ProbabilityFamily.from_measures(
        inst.space, [list(zip(grid, row)) for row in p], norm_tol=1e-9
    )
    rep = verify_cc(inst, fam, tol=tol)
    worst = rep.max_residual
    if certifying:
        worst = max(worst, verify_cc1(inst, fam, tol=tol).max_residual)
    if worst > tol:
        raise PostconditionError(f"solver output fails verification (residual {worst:.3e})")
    return CcSolution(True, fam, grid, worst, certifying, res.iterations)


# --------------------------------------------------------------------------
# certificates


@dataclass
class Certificate:
    certified: bool
    reason: str
    family: ProbabilityFamily | None = None
    family_source: str | None = None
    cc: CcReport | None = None
    extension: ExtensionSystem | None = None
    extension_quasinormal: bool | None = None
    intertwining_residual: float | None = None
    isometry_residual: float | None = None
    moments: MomentReport | None = None
    normal: bool | None = None
    normal_route: str | None = None
    adjoint_certified: bool | None = None
    checks: dict = field(default_factory=dict)


def default_grid(inst: SystemInstance) -> np.ndarray:
    h = compute_h(inst).values
    return merge_locations(np.concatenate([[0.0], h]))[0]


def _candidate_family(inst: SystemInstance) -> tuple[ProbabilityFamily, str]:
    if inst.is_multiplication:
        return ProbabilityFamily.dirac(inst.space, np.abs(inst.w) ** 2), "dirac_abs_w_squared"
    return ProbabilityFamily.dirac(inst.space, compute_h(inst).values), "dirac_h"


def certify_subnormal(
    inst: SystemInstance,
    family: ProbabilityFamily | None = None,
    grid=None,
    *,
    n_max: int = N_MAX,
    tol: float = DEFAULT.abs,
    _with_adjoint: bool = True,
) -> Certificate:
    """Full pipeline: positivity of h on the support, a CC family, the extension, moments.

    Negative outcomes are returned as uncertified certificates with a reason.
    """
    op = WcOperator(inst)
    h = op.h.values
    sup = inst.support
    checks = {"well_defined": op.well_defined, "densely_defined": op.densely_defined}
    bad = np.flatnonzero(sup & (h == 0))
    checks["h_positive_on_support"] = bad.size == 0
    if bad.size:
        x = int(bad[0])
        w = inst.w[x]
        return Certificate(
            False,
            f"h = 0 on {{w != 0}}: h vanishes at atom {inst.space.atoms[x]!r} where w = {w.real:g}{w.imag:+g}j; "
            "a subnormal operator is hyponormal, which forces h > 0 on {w != 0}",
            checks=checks,
        )

    source = "given"
    if family is None:
        family, source = _candidate_family(inst)
        if not verify_cc(inst, family, tol=tol).satisfied:
            sol = solve_cc(inst, default_grid(inst) if grid is None else grid)
            if not sol.feasible:
                return Certificate(
                    False,
                    f"no family on the grid satisfies CC (phase-one infeasibility {sol.residual:.3e})",
                    checks=checks,
                )
            family, source = sol.family, "solver"
    cc = verify_cc(inst, family, tol=DEFAULT.solver if source == "solver" else tol)
    checks["cc"] = cc.satisfied
    if not cc.satisfied:
        return Certificate(False, f"family violates CC at {cc.worst()}", family, source, cc, checks=checks)

    ext = build_extension(inst, family, tol=cc.tolerance)
    q = is_quasinormal(ext.operator)
    inter = intertwining_residual(ext)
    iso = isometry_residual(ext)
    moments = moments_check(inst, family, n_max, cc_tol=cc.tolerance)
    checks.update({
        "extension_quasinormal": q.value,
        "intertwining": inter <= tol,
        "isometry": iso <= tol,
        "moments": moments.passed,
    })
    certified = all(checks.values())
    cert = Certificate(
        certified,
        "certified subnormal: the product extension is quasinormal" if certified
        else "checks failed: " + ", ".join(k for k, v in checks.items() if not v),
        family, source, cc, ext, q.value, inter, iso, moments, checks=checks,
    )
    if _with_adjoint:
        if inst.is_multiplication:
            adj = certify_subnormal(inst.with_weight(np.conj(inst.w)), n_max=n_max, tol=tol,
                                    _with_adjoint=False)
            cert.adjoint_certified = adj.certified
            cert.normal = certified and adj.certified
            cert.normal_route = "operator and adjoint both subnormal"
        else:
            cert.normal = is_normal(op).value
            cert.normal_route = "matrix commutator"
    return cert
