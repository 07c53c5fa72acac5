"""Invariant suites run over a generated corpus.

Each check takes an instance and a random generator and either returns
normally or raises; library postconditions are enabled throughout, so a
check also exercises every internal cross-check on its path.
"""
from __future__ import annotations

import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from typing import Callable

import numpy as np

from .calculus import (
    change_of_variables,
    compute_h,
    cond_expectation,
    cond_expectation_inv,
    density_mu_sup_w,
    fiber_mass,
)
from .errors import ExtensionError
from .generators import KINDS, generate_instance
from .operator import (
    L2Vector,
    WcOperator,
    adjoint_apply,
    apply,
    h_n,
    kernel_basis,
    operator_norm,
)
from .space import (
    SystemInstance,
    base_measure,
    is_absolutely_continuous,
    make_mu_sup_w,
    make_mu_w,
    pushforward,
)
from .structure import adjoint_modulus_apply, classify, polar_decompose
from .subnormality import (
    ProbabilityFamily,
    build_extension,
    certify_subnormal,
    default_grid,
    lemma_cc_equivalences,
    main1_battery,
    solve_cc,
    verify_cc,
    verify_cc1,
)
from .tolerance import deviation

Check = Callable[[SystemInstance, np.random.Generator], None]


class CheckFailure(AssertionError):
    pass


def _expect(cond: bool, message: str) -> None:
    if not cond:
        raise CheckFailure(message)


def _random_vector(inst: SystemInstance, rng: np.random.Generator) -> L2Vector:
    return L2Vector(inst.space, rng.standard_normal(inst.n) + 1j * rng.standard_normal(inst.n))


def projection_oracle(inst: SystemInstance, f: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto fiber-constant functions in ``L^2(mu_w)``, by least squares."""
    sup = np.flatnonzero(inst.support)
    images = np.unique(inst.phi[sup])
    basis = (inst.phi[sup][:, None] == images[None, :]).astype(float)
    root = np.sqrt(np.abs(inst.w[sup]) ** 2 * inst.mu[sup])
    coef, *_ = np.linalg.lstsq(basis * root[:, None], f[sup] * root, rcond=None)
    out = np.zeros(inst.n, complex)
    out[sup] = basis @ coef
    return out


def check_space(inst, rng):
    a, b = make_mu_w(inst), make_mu_sup_w(inst)
    _expect(is_absolutely_continuous(a, b) and is_absolutely_continuous(b, a),
            "mu_w and mu^w are not mutually absolutely continuous")
    push = pushforward(a, inst.phi)
    _expect(abs(push.total - a.total) <= 1e-12 * max(1.0, a.total), "pushforward changes total mass")
    _expect(is_absolutely_continuous(push, base_measure(inst.space)), "mu_w o phi^-1 not << mu")


def check_calculus(inst, rng):
    f = rng.standard_normal(inst.n)
    change_of_variables(inst, f)
    change_of_variables(inst, 1.0)
    g = rng.standard_normal(inst.n) + 1j * rng.standard_normal(inst.n)
    e = cond_expectation(inst, g)
    sup = inst.support
    _expect(deviation(e.values[sup], projection_oracle(inst, g)[sup]) <= 1e-10,
            "E disagrees with the least-squares projection")
    _expect(deviation(cond_expectation(inst, e.values).values[sup], e.values[sup]) <= 1e-10,
            "E is not idempotent")
    _expect(np.all(np.abs(cond_expectation(inst, 1.0).values[sup] - 1) <= 1e-12), "E(1) != 1")
    weight = np.abs(inst.w) ** 2 * inst.mu
    _expect(np.sum(np.abs(e.values) ** 2 * weight) <= np.sum(np.abs(g) ** 2 * weight) * (1 + 1e-12) + 1e-300,
            "E is not contractive")
    inv = cond_expectation_inv(inst, g)
    _expect(np.all(inv.values[fiber_mass(inst) == 0] == 0), "E(f) o phi^-1 not zero on {h=0}")
    density_mu_sup_w(inst)


def check_operator(inst, rng):
    op = WcOperator(inst)
    f, g = _random_vector(inst, rng), _random_vector(inst, rng)
    cf = apply(op, f)
    cg = adjoint_apply(op, g)
    _expect(abs(cf.inner(g) - f.inner(cg)) <= 1e-10 * max(1.0, cf.norm() * g.norm()),
            "<Cf, g> != <f, C*g>")
    operator_norm(op)
    kernel_basis(op)
    for n in range(7):
        h_n(inst, n)


def check_structure(inst, rng):
    op = WcOperator(inst)
    polar_decompose(op)
    adjoint_modulus_apply(op, _random_vector(inst, rng))
    classify(op)


def _random_family(inst, rng) -> ProbabilityFamily:
    pool = np.concatenate([[0.0], compute_h(inst).values, rng.uniform(0, 5, 2)])
    measures = []
    for _ in range(inst.n):
        k = int(rng.integers(1, 3))
        pts = rng.choice(pool, size=k)
        p = rng.dirichlet(np.ones(k))
        p[-1] = 1.0 - p[:-1].sum()
        measures.append(list(zip(pts, p)))
    return ProbabilityFamily.from_measures(inst.space, measures, norm_tol=1e-9)


def check_cc_equivalences(inst, rng):
    h = compute_h(inst).values
    for fam in (_random_family(inst, rng), ProbabilityFamily.dirac(inst.space, h)):
        eq = lemma_cc_equivalences(inst, fam)
        _expect(len(set(eq.values())) == 1, f"CC formulations split: {eq}")
        verify_cc1(inst, fam)


def check_pipeline(inst, rng):
    fam = ProbabilityFamily.dirac(inst.space, compute_h(inst).values)
    if not verify_cc(inst, fam).satisfied:
        return
    rep = main1_battery(inst, fam)
    try:
        build_extension(inst, fam)
    except ExtensionError:
        _expect(not rep.main1_battery["h_positive_on_support"],
                "extension undefined although h > 0 on {w != 0}")
    cert = certify_subnormal(inst, fam)
    _expect(cert.certified == rep.main1_battery["h_positive_on_support"],
            "certificate disagrees with the main battery")


def check_solver(inst, rng):
    grid = default_grid(inst)
    sol = solve_cc(inst, grid)
    if sol.feasible:
        _expect(verify_cc(inst, sol.family, tol=1e-8).satisfied, "solver family fails CC")
    h = compute_h(inst).values
    if verify_cc(inst, ProbabilityFamily.dirac(inst.space, h)).satisfied and np.all(h[inst.support] > 0):
        _expect(sol.feasible, "solver missed the delta_h family")
    loose = solve_cc(inst, grid, certifying=False)
    _expect(loose.feasible or not sol.feasible, "certifying system feasible but CC alone is not")


CHECKS: dict[str, Check] = {
    "space": check_space,
    "calculus": check_calculus,
    "operator": check_operator,
    "structure": check_structure,
    "cc_equivalences": check_cc_equivalences,
    "pipeline": check_pipeline,
    "solver": check_solver,
}


def corpus(count: int, seed: int = 0):
    """``(kind, size, seed)`` triples cycling through every generator kind."""
    for i in range(count):
        kind = KINDS[i % len(KINDS)]
        size = 1 + (i // len(KINDS)) % (6 if kind == "collapse" else 12)
        yield kind, size, seed + i


def _run_chunk(jobs) -> tuple[Counter, Counter, list]:
    passed, failed, failures = Counter(), Counter(), []
    for kind, size, s in jobs:
        inst = generate_instance(kind, size, s).instance
        rng = np.random.default_rng(s)
        for name, check in CHECKS.items():
            try:
                check(inst, rng)
            except Exception as exc:  # noqa: BLE001 - every failure is reported, not raised
                failed[name] += 1
                if len(failures) < 20:
                    failures.append({"check": name, "kind": kind, "size": size, "seed": s,
                                     "error": f"{type(exc).__name__}: {exc}"})
            else:
                passed[name] += 1
    return passed, failed, failures


def run_selftest(count: int = 500, *, seed: int = 0, workers: int = 1) -> dict:
    start = time.perf_counter()
    jobs = list(corpus(count, seed))
    if workers > 1:
        chunks = [jobs[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_chunk, chunks))
    else:
        parts = [_run_chunk(jobs)]
    passed, failed, failures = Counter(), Counter(), []
    for p, f, fl in parts:
        passed.update(p)
        failed.update(f)
        failures.extend(fl)
    return {
        "instances": count,
        "seed": seed,
        "workers": workers,
        "checks": {name: {"passed": passed[name], "failed": failed[name]} for name in CHECKS},
        "failed": sum(failed.values()),
        "failures": failures[:20],
        "elapsed_seconds": time.perf_counter() - start,
    }
